"""Motion sequences: root-factored local pose state plus global root motion.

Conventions (all distances cm, world up +Z, canonical facing +Y):

- xr (T, J, 6): per-joint local rotations in 6D form. In canonical form the
  root entry is the identity; the root's world orientation lives in ro.
- ro (T, 6): root orientation. The root's local frame has +z forward and
  +y up, so at neutral heading ro decodes to NEUTRAL_ROOT (local z -> world
  +Y). The facing direction of an orientation R is the ground projection
  of R @ e_z.
- root_pos (T, 3): world root translation; its z component is the root
  height channel.
- xp / xpv / xrv are derived: local joint positions from FK with the root
  at the origin, their finite-difference velocities, and per-joint angular
  velocities of the local rotations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .kinematics import Skeleton, angular_velocity, finite_difference_velocity, forward_kinematics
from .rotations import (IDENTITY_6D, matrix_to_quat, matrix_to_rot6d, quat_to_matrix,
                        rot6d_to_matrix, slerp)

# maps the root's local axes to world axes at neutral heading:
# local x -> world -X, local y -> world +Z (up), local z -> world +Y (forward)
NEUTRAL_ROOT = np.array([
    [-1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.0, 1.0, 0.0],
])

MOTION_FORMAT_VERSION = 1


class MotionError(ValueError):
    pass


def facing_direction(ro_mats: np.ndarray) -> np.ndarray:
    """Unit ground-plane facing vectors from (..., 3, 3) root orientations.

    Facing is the root z-axis projected to the ground; near-vertical z-axes
    fall back to the +Y canonical facing.
    """
    f = ro_mats[..., :2, 2]
    norm = np.linalg.norm(f, axis=-1, keepdims=True)
    default = np.broadcast_to(np.array([0.0, 1.0]), f.shape)
    return np.where(norm > 1e-8, f / np.where(norm > 1e-8, norm, 1.0), default)


def heading_angle(facing: np.ndarray) -> np.ndarray:
    """Signed heading (radians) of ground facing vectors, 0 at +Y."""
    facing = np.asarray(facing, dtype=np.float64)
    return np.arctan2(-facing[..., 0], facing[..., 1])


@dataclass
class MotionSequence:
    skeleton: Skeleton
    fps: float
    xr: np.ndarray
    ro: np.ndarray
    root_pos: np.ndarray
    xp: np.ndarray = field(repr=False, default=None)
    xpv: np.ndarray = field(repr=False, default=None)
    xrv: np.ndarray = field(repr=False, default=None)

    @classmethod
    def from_rotations(cls, skeleton: Skeleton, fps: float, xr, ro, root_pos) -> "MotionSequence":
        """Build a sequence from rotations, deriving positions and velocities."""
        xr = np.asarray(xr, dtype=np.float64)
        ro = np.asarray(ro, dtype=np.float64)
        root_pos = np.asarray(root_pos, dtype=np.float64)
        t = xr.shape[0]
        if t < 2:
            raise MotionError(f"sequence needs at least 2 frames, got {t}")
        j = skeleton.n_joints
        if xr.shape != (t, j, 6):
            raise MotionError(f"xr shape {xr.shape} != {(t, j, 6)}")
        if ro.shape != (t, 6):
            raise MotionError(f"ro shape {ro.shape} != {(t, 6)}")
        if root_pos.shape != (t, 3):
            raise MotionError(f"root_pos shape {root_pos.shape} != {(t, 3)}")
        dt = 1.0 / fps
        local_mats = rot6d_to_matrix(xr)
        rot6d_to_matrix(ro)  # validates decodability
        xp = forward_kinematics(skeleton, local_mats, np.zeros((t, 3)))
        xpv = finite_difference_velocity(xp, dt)
        xrv = angular_velocity(local_mats, dt)
        return cls(skeleton=skeleton, fps=float(fps), xr=xr, ro=ro, root_pos=root_pos,
                   xp=xp, xpv=xpv, xrv=xrv)

    @property
    def n_frames(self) -> int:
        return self.xr.shape[0]

    @property
    def n_joints(self) -> int:
        return self.skeleton.n_joints

    @property
    def duration(self) -> float:
        return (self.n_frames - 1) / self.fps

    @property
    def root_height(self) -> np.ndarray:
        return self.root_pos[:, 2]

    def local_rotation_matrices(self) -> np.ndarray:
        return rot6d_to_matrix(self.xr)

    def root_orientation_matrices(self) -> np.ndarray:
        return rot6d_to_matrix(self.ro)

    def facing(self) -> np.ndarray:
        return facing_direction(self.root_orientation_matrices())

    def world_positions(self) -> np.ndarray:
        """World-space joint positions: root transform applied to xp."""
        ro_mats = self.root_orientation_matrices()
        return self.root_pos[:, None, :] + np.einsum("tij,tkj->tki", ro_mats, self.xp)

    def is_canonical(self, tol=1e-9) -> bool:
        return bool(np.max(np.abs(self.xr[:, 0] - IDENTITY_6D)) <= tol)

    def features(self) -> np.ndarray:
        """Per-frame local state flattened to (T, J*15): xp, xpv, xr, xrv."""
        t = self.n_frames
        return np.concatenate([
            self.xp.reshape(t, -1),
            self.xpv.reshape(t, -1),
            self.xr.reshape(t, -1),
            self.xrv.reshape(t, -1),
        ], axis=1)

    def to_dict(self) -> dict:
        return {
            "version": MOTION_FORMAT_VERSION,
            "skeleton": self.skeleton.to_dict(),
            "fps": self.fps,
            "frames": {
                "xr": self.xr.tolist(),
                "ro": self.ro.tolist(),
                "root_pos": self.root_pos.tolist(),
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MotionSequence":
        version = d.get("version")
        if version != MOTION_FORMAT_VERSION:
            raise MotionError(f"unsupported motion format version {version!r}")
        return cls.from_rotations(
            Skeleton.from_dict(d["skeleton"]), float(d["fps"]),
            d["frames"]["xr"], d["frames"]["ro"], d["frames"]["root_pos"])


def save_motion(seq: MotionSequence, path) -> None:
    Path(path).write_text(json.dumps(seq.to_dict()))


def load_motion(path) -> MotionSequence:
    return MotionSequence.from_dict(json.loads(Path(path).read_text()))


def canonicalize(seq: MotionSequence) -> MotionSequence:
    """Fold the root's local rotation into the root orientation channel.

    After this the root entry of xr is the identity and every frame's local
    state lives in the fully root-relative frame, so all poses share the
    same facing. decanonicalize inverts it.
    """
    local = seq.local_rotation_matrices()
    ro_mats = seq.root_orientation_matrices()
    combined = ro_mats @ local[:, 0]
    xr = seq.xr.copy()
    xr[:, 0] = IDENTITY_6D
    return MotionSequence.from_rotations(
        seq.skeleton, seq.fps, xr, matrix_to_rot6d(combined), seq.root_pos.copy())


def decanonicalize(seq: MotionSequence) -> MotionSequence:
    """Move the root orientation back into the root's xr entry."""
    ro_mats = seq.root_orientation_matrices()
    local = seq.local_rotation_matrices()
    xr0 = ro_mats @ local[:, 0]
    xr = seq.xr.copy()
    xr[:, 0] = matrix_to_rot6d(xr0)
    ro = np.tile(IDENTITY_6D, (seq.n_frames, 1))
    return MotionSequence.from_rotations(seq.skeleton, seq.fps, xr, ro, seq.root_pos.copy())


def resample(seq: MotionSequence, new_fps: float) -> MotionSequence:
    """Resample by per-joint SLERP and linear root interpolation.

    The new frame count is round(duration * new_fps) + 1 and the sequence
    is stretched so both endpoints are reproduced exactly.
    """
    if new_fps <= 0:
        raise MotionError(f"target fps must be positive, got {new_fps}")
    t_old = seq.n_frames
    t_new = int(round((t_old - 1) * new_fps / seq.fps)) + 1
    if t_new < 2:
        t_new = 2
    local = seq.local_rotation_matrices()
    ro_mats = seq.root_orientation_matrices()
    quats = matrix_to_quat(local)
    ro_quats = matrix_to_quat(ro_mats)
    xr = np.empty((t_new, seq.n_joints, 6))
    ro = np.empty((t_new, 6))
    root = np.empty((t_new, 3))
    for i in range(t_new):
        s = i * (t_old - 1) / (t_new - 1)
        i0 = min(int(np.floor(s)), t_old - 2)
        u = s - i0
        for j in range(seq.n_joints):
            xr[i, j] = matrix_to_rot6d(quat_to_matrix(slerp(quats[i0, j], quats[i0 + 1, j], u)))
        ro[i] = matrix_to_rot6d(quat_to_matrix(slerp(ro_quats[i0], ro_quats[i0 + 1], u)))
        root[i] = (1 - u) * seq.root_pos[i0] + u * seq.root_pos[i0 + 1]
    return MotionSequence.from_rotations(seq.skeleton, seq.fps * (t_new - 1) / (t_old - 1), xr, ro, root)


@dataclass
class TrajectorySpec:
    """Per-frame 2D ground-plane targets with unit tangents."""

    points: np.ndarray
    tangents: np.ndarray = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != 2 or len(self.points) < 2:
            raise MotionError(f"trajectory needs (T>=2, 2) points, got {self.points.shape}")
        if self.tangents is None:
            self.tangents = self._derive_tangents(self.points)
        else:
            self.tangents = np.asarray(self.tangents, dtype=np.float64)

    @staticmethod
    def _derive_tangents(points: np.ndarray) -> np.ndarray:
        diffs = np.empty_like(points)
        diffs[0] = points[1] - points[0]
        diffs[-1] = points[-1] - points[-2]
        diffs[1:-1] = points[2:] - points[:-2]
        tangents = np.empty_like(points)
        prev = np.array([0.0, 1.0])  # canonical facing when fully degenerate
        # forward-fill: a zero-length segment reuses the previous tangent
        first_valid = None
        for i, d in enumerate(diffs):
            n = np.linalg.norm(d)
            if n > 1e-9:
                prev = d / n
                if first_valid is None:
                    first_valid = i
            tangents[i] = prev
        if first_valid is not None and first_valid > 0:
            tangents[:first_valid] = tangents[first_valid]
        return tangents

    @property
    def n_frames(self) -> int:
        return len(self.points)

    @classmethod
    def from_polyline(cls, polyline, frames: int) -> "TrajectorySpec":
        """Resample a polyline to `frames` arclength-uniform points."""
        pts = np.asarray(polyline, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise MotionError(f"polyline needs (N>=2, 2) points, got {pts.shape}")
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        arc = np.concatenate([[0.0], np.cumsum(seg)])
        total = arc[-1]
        if total <= 1e-12:
            return cls(points=np.tile(pts[0], (frames, 1)))
        targets = np.linspace(0.0, total, frames)
        out = np.empty((frames, 2))
        for i, a in enumerate(targets):
            k = min(int(np.searchsorted(arc, a, side="right")) - 1, len(seg) - 1)
            u = (a - arc[k]) / seg[k] if seg[k] > 0 else 0.0
            out[i] = (1 - u) * pts[k] + u * pts[k + 1]
        return cls(points=out)

    def to_list(self) -> list:
        return self.points.tolist()
