"""Skeleton hierarchy, forward kinematics, and finite-difference velocities.

Units are centimeters. World up is +Z. The root joint's local frame uses
+z as its forward axis and +y as its up axis, so a root orientation at
neutral heading maps local +z to world +Y (the canonical facing direction).

forward_kinematics and the velocity routines are type-preserving over
autodiff Nodes, like the rotations module.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .rotations import log_map


class SkeletonError(ValueError):
    pass


@dataclass
class Skeleton:
    """Joint hierarchy with rest-pose offsets (cm) in parent-local frames.

    parents[i] is the parent index of joint i, -1 for the single root.
    Joints must be topologically sorted (parent index < child index).
    foot_joints name the joints used for ground-contact metrics.
    """

    names: list
    parents: list
    offsets: np.ndarray
    foot_joints: list = field(default_factory=list)

    def __post_init__(self):
        self.offsets = np.asarray(self.offsets, dtype=np.float64)
        j = len(self.names)
        if j < 2:
            raise SkeletonError(f"skeleton needs at least 2 joints, got {j}")
        if len(self.parents) != j or self.offsets.shape != (j, 3):
            raise SkeletonError("names/parents/offsets lengths disagree")
        roots = [i for i, p in enumerate(self.parents) if p < 0]
        if roots != [0]:
            raise SkeletonError(f"expected exactly one root at index 0, got {roots}")
        for i, p in enumerate(self.parents[1:], start=1):
            if p >= i:
                raise SkeletonError(f"joint {i} has parent {p}; joints must be topologically sorted")
        for name in self.foot_joints:
            if name not in self.names:
                raise SkeletonError(f"foot joint {name!r} not in skeleton")

    @property
    def n_joints(self) -> int:
        return len(self.names)

    def foot_indices(self) -> list:
        return [self.names.index(n) for n in self.foot_joints]

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "parents": list(self.parents),
            "offsets": self.offsets.tolist(),
            "foot_joints": list(self.foot_joints),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Skeleton":
        return cls(names=list(d["names"]), parents=list(d["parents"]),
                   offsets=np.asarray(d["offsets"], dtype=np.float64),
                   foot_joints=list(d.get("foot_joints", [])))


def forward_kinematics(skeleton: Skeleton, rotations, root_pos):
    """Joint positions from per-joint local rotations and a root position.

    rotations is (..., J, 3, 3) (leading dims batch over frames); root_pos
    is (..., 3). position(child) = position(parent) + R_global(parent) @
    offset(child), with R_global chaining down the hierarchy. Differentiable
    through both inputs when they are Nodes.
    """
    graph = isinstance(rotations, ad.Node) or isinstance(root_pos, ad.Node)
    rot = ad.lift(rotations)
    root = ad.lift(root_pos)
    if rot.value.shape[-3] != skeleton.n_joints:
        raise SkeletonError(
            f"expected {skeleton.n_joints} joint rotations, got {rot.value.shape[-3]}")
    globals_r = [rot[..., 0, :, :]]
    positions = [root]
    for j in range(1, skeleton.n_joints):
        p = skeleton.parents[j]
        offset = ad.constant(skeleton.offsets[j].reshape(3, 1))
        pos = positions[p] + ad.reshape(ad.matmul(globals_r[p], offset),
                                        globals_r[p].value.shape[:-2] + (3,))
        globals_r.append(ad.matmul(globals_r[p], rot[..., j, :, :]))
        positions.append(pos)
    out = ad.stack(positions, axis=-2)
    return out if graph else out.value


def global_rotations(skeleton: Skeleton, rotations):
    """Accumulated world-frame rotation per joint, numpy only."""
    rot = np.asarray(rotations, dtype=np.float64)
    out = np.empty_like(rot)
    out[..., 0, :, :] = rot[..., 0, :, :]
    for j in range(1, skeleton.n_joints):
        p = skeleton.parents[j]
        out[..., j, :, :] = out[..., p, :, :] @ rot[..., j, :, :]
    return out


def finite_difference_velocity(series, dt: float):
    """Per-frame time derivative: central differences interior, one-sided ends.

    series has frames on axis 0 and at least 2 of them.
    """
    graph = isinstance(series, ad.Node)
    s = ad.lift(series)
    t = s.value.shape[0]
    if t < 2:
        raise ValueError(f"need at least 2 frames for velocities, got {t}")
    first = (s[1:2] - s[0:1]) / dt
    last = (s[t - 1:t] - s[t - 2:t - 1]) / dt
    if t == 2:
        out = ad.concat([first, last], axis=0)
    else:
        interior = (s[2:] - s[:-2]) / (2.0 * dt)
        out = ad.concat([first, interior, last], axis=0)
    return out if graph else out.value


def angular_velocity(rotmats, dt: float):
    """Rotation-vector rates (rad/s) from a (T, ..., 3, 3) matrix track.

    Interior frames use the central relative rotation R_{t+1} R_{t-1}^T
    over 2*dt; the ends use the one-step relative rotation over dt.
    """
    graph = isinstance(rotmats, ad.Node)
    r = ad.lift(rotmats)
    t = r.value.shape[0]
    if t < 2:
        raise ValueError(f"need at least 2 frames for angular velocity, got {t}")
    swap = tuple(range(r.value.ndim))[:-2] + (r.value.ndim - 1, r.value.ndim - 2)

    def rel(a, b):
        return ad.matmul(a, ad.transpose(b, axes=swap))

    first = log_map(rel(r[1:2], r[0:1])) / dt
    last = log_map(rel(r[t - 1:t], r[t - 2:t - 1])) / dt
    if t == 2:
        out = ad.concat([first, last], axis=0)
    else:
        interior = log_map(rel(r[2:], r[:-2])) / (2.0 * dt)
        out = ad.concat([first, interior, last], axis=0)
    return out if graph else out.value
