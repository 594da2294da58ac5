"""Procedural gait generator: a deterministic desk-scale motion dataset.

The biped has a 9-joint hierarchy (root, spine, head, and hip/knee/foot per
leg). Walking is a sinusoidal gait parameterized by stride frequency,
stride length, turning rate, and torso sway. Feet follow explicit plant
points: world-fixed during stance, half-sine lifts during swing, so the
ground truth has essentially zero foot skating. Leg rotations come from an
exact two-bone IK, which keeps stored rotations and foot targets
consistent through FK.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kinematics import Skeleton
from .motion import NEUTRAL_ROOT, MotionSequence
from .rotations import IDENTITY_6D, matrix_to_rot6d, rotation_z

# world-frame rest offsets; converted below into parent-local coordinates
_WORLD_OFFSETS = {
    "root": (0.0, 0.0, 0.0),
    "spine": (0.0, 0.0, 25.0),
    "head": (0.0, 0.0, 30.0),
    "hip_l": (-10.0, 0.0, -5.0),
    "knee_l": (0.0, 0.0, -40.0),
    "foot_l": (0.0, 0.0, -43.0),
    "hip_r": (10.0, 0.0, -5.0),
    "knee_r": (0.0, 0.0, -40.0),
    "foot_r": (0.0, 0.0, -43.0),
}
_PARENTS = {
    "root": None, "spine": "root", "head": "spine",
    "hip_l": "root", "knee_l": "hip_l", "foot_l": "knee_l",
    "hip_r": "root", "knee_r": "hip_r", "foot_r": "knee_r",
}

THIGH_LEN = 40.0
SHIN_LEN = 43.0
LEG_LEN = THIGH_LEN + SHIN_LEN
REST_ROOT_HEIGHT = 88.0  # legs fully extended, feet on the ground


def biped_skeleton() -> Skeleton:
    names = list(_WORLD_OFFSETS)
    parents = [-1 if _PARENTS[n] is None else names.index(_PARENTS[n]) for n in names]
    # offsets are parent-local; every local frame at rest equals the root's,
    # so one world->local change of basis applies throughout
    offsets = np.stack([NEUTRAL_ROOT.T @ np.array(_WORLD_OFFSETS[n]) for n in names])
    return Skeleton(names=names, parents=parents, offsets=offsets,
                    foot_joints=["foot_l", "foot_r"])


@dataclass
class GaitParams:
    stride_hz: float = 0.9       # steps per second per foot
    stride_len: float = 25.0     # cm per cycle of one foot
    turn_rate: float = 0.0       # rad/s heading change
    sway: float = 0.06           # torso roll amplitude, radians
    lift: float = 7.0            # swing foot apex height, cm
    duty: float = 0.6            # stance fraction of the cycle
    base_height: float = 84.0    # pelvis height while moving, cm
    bob: float = 1.2             # vertical pelvis oscillation, cm


@dataclass
class SynthConfig:
    n_sequences: int = 8
    frames: int = 128
    fps: float = 30.0
    seed: int = 0
    stride_hz_range: tuple = (0.6, 1.1)
    stride_len_range: tuple = (8.0, 34.0)
    turn_range: tuple = (-0.5, 0.5)
    sway_range: tuple = (0.02, 0.12)
    lift_range: tuple = (4.0, 9.0)
    height_range: tuple = (82.0, 86.0)
    idle_fraction: float = 0.15  # idle sequences keep the feet planted

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def _rodrigues(axis_sin, cos):
    """Rotation matrices from axis*sin(angle) and cos(angle), batched (T, 3)."""
    t = axis_sin.shape[0]
    k = np.zeros((t, 3, 3))
    k[:, 0, 1] = -axis_sin[:, 2]
    k[:, 0, 2] = axis_sin[:, 1]
    k[:, 1, 0] = axis_sin[:, 2]
    k[:, 1, 2] = -axis_sin[:, 0]
    k[:, 2, 0] = -axis_sin[:, 1]
    k[:, 2, 1] = axis_sin[:, 0]
    s2 = np.einsum("ti,ti->t", axis_sin, axis_sin)
    eye = np.broadcast_to(np.eye(3), (t, 3, 3))
    factor = np.where(s2 > 1e-16, (1.0 - cos) / np.where(s2 > 1e-16, s2, 1.0), 0.5)
    return eye + k + factor[:, None, None] * (k @ k)


def _align_rotation(src, dst):
    """Minimal rotations mapping unit vectors src -> dst, batched (T, 3)."""
    axis_sin = np.cross(src, dst)
    cos = np.einsum("ti,ti->t", src, dst)
    return _rodrigues(axis_sin, cos)


def _rot_about(axis, angle):
    """Rotation about a fixed unit axis, batched over angle (T,)."""
    axis = np.asarray(axis, dtype=np.float64)
    axis_sin = np.sin(angle)[:, None] * axis
    return _rodrigues(axis_sin, np.cos(angle))


def _foot_track(cycles, plant_fn, duty, lift):
    """World foot targets for per-frame cycle coordinates.

    plant_fn(c) gives the world (x, y) plant point of cycle c. Stance holds
    the plant; swing blends to the next plant with a smoothstep so the
    horizontal velocity is zero at touchdown and liftoff.
    """
    c = np.floor(cycles).astype(int)
    u = cycles - c
    stance = u < duty
    s = np.clip((u - duty) / max(1.0 - duty, 1e-9), 0.0, 1.0)
    blend = s * s * (3.0 - 2.0 * s)
    cur = plant_fn(c)
    nxt = plant_fn(c + 1)
    xy = np.where(stance[:, None], cur, cur + blend[:, None] * (nxt - cur))
    z = np.where(stance, 0.0, lift * np.sin(np.pi * s))
    return np.concatenate([xy, z[:, None]], axis=1)


def _leg_ik(d):
    """Exact two-bone IK in the root frame.

    d is (T, 3) hip-to-target. Returns hip and knee local rotation matrices.
    The knee bends about the local x axis (foot swings backward); the hip
    takes whatever minimal rotation lands the foot exactly on the target.
    """
    dist = np.linalg.norm(d, axis=1)
    dist = np.clip(dist, abs(THIGH_LEN - SHIN_LEN) + 1e-6, LEG_LEN - 1e-3)
    cos_knee = (THIGH_LEN**2 + SHIN_LEN**2 - dist**2) / (2.0 * THIGH_LEN * SHIN_LEN)
    alpha = np.pi - np.arccos(np.clip(cos_knee, -1.0, 1.0))
    knee_rot = _rot_about(np.array([1.0, 0.0, 0.0]), alpha)
    # reach of the bent leg in the hip frame, same length as dist
    reach = np.stack([
        np.zeros_like(alpha),
        -THIGH_LEN - SHIN_LEN * np.cos(alpha),
        -SHIN_LEN * np.sin(alpha),
    ], axis=1)
    hip_rot = _align_rotation(reach / dist[:, None], d / np.linalg.norm(d, axis=1, keepdims=True))
    return hip_rot, knee_rot


def generate_walk(params: GaitParams, frames: int, fps: float,
                  skeleton: Skeleton | None = None) -> MotionSequence:
    """One gait sequence from closed-form trajectories plus leg IK."""
    if frames < 16:
        raise ValueError(f"need at least 16 frames, got {frames}")
    sk = skeleton or biped_skeleton()
    names = sk.names
    tau = np.arange(frames) / fps
    heading = params.turn_rate * tau
    direction = np.stack([-np.sin(heading), np.cos(heading)], axis=1)
    speed = params.stride_len * params.stride_hz
    dt = 1.0 / fps
    path = np.concatenate([[(0.0, 0.0)], np.cumsum(speed * dt * direction[:-1], axis=0)])

    height = params.base_height - params.bob * 0.5 * (1 - np.cos(4 * np.pi * params.stride_hz * tau))
    root_pos = np.concatenate([path, height[:, None]], axis=1)
    ro_mats = rotation_z(heading) @ NEUTRAL_ROOT

    def plant_point(lateral_world):
        def fn(cycle):
            # the root passes over the plant at mid-stance
            t_mid = np.clip((cycle + 0.5 * params.duty) / max(params.stride_hz, 1e-9),
                            0.0, None)
            phi = params.turn_rate * t_mid
            rightward = np.stack([np.cos(phi), np.sin(phi)], axis=1)
            return _path_at(t_mid) + lateral_world * rightward

        return fn

    def _path_at(t_query):
        # linear interpolation on the discrete path (extended past the ends)
        idx = t_query * fps
        i0 = np.clip(np.floor(idx).astype(int), 0, frames - 2)
        u = idx - i0
        seg = path[i0 + 1] - path[i0]
        out = path[i0] + u[:, None] * seg
        return out

    xr = np.zeros((frames, sk.n_joints, 6))
    xr[:] = IDENTITY_6D

    phase_osc = np.sin(2 * np.pi * params.stride_hz * tau)
    sway_rot = _rot_about(np.array([0.0, 0.0, 1.0]), params.sway * phase_osc)
    head_rot = _rot_about(np.array([0.0, 0.0, 1.0]), -0.5 * params.sway * phase_osc)
    xr[:, names.index("spine")] = matrix_to_rot6d(sway_rot)
    xr[:, names.index("head")] = matrix_to_rot6d(head_rot)

    moving = params.duty < 1.0
    for leg, phase0, lateral in (("l", 0.0, -10.0), ("r", 0.5, 10.0)):
        cycles = params.stride_hz * tau + phase0
        if moving:
            foot_world = _foot_track(cycles, plant_point(lateral), params.duty, params.lift)
        else:
            plant = plant_point(lateral)(np.zeros(frames, dtype=int))
            foot_world = np.concatenate([plant, np.zeros((frames, 1))], axis=1)
        hip_idx = names.index(f"hip_{leg}")
        hip_world = root_pos + np.einsum("tij,j->ti", ro_mats, sk.offsets[hip_idx])
        d_root = np.einsum("tji,tj->ti", ro_mats, foot_world - hip_world)
        hip_rot, knee_rot = _leg_ik(d_root)
        xr[:, hip_idx] = matrix_to_rot6d(hip_rot)
        xr[:, names.index(f"knee_{leg}")] = matrix_to_rot6d(knee_rot)

    return MotionSequence.from_rotations(sk, fps, xr, matrix_to_rot6d(ro_mats), root_pos)


def generate_idle(params: GaitParams, frames: int, fps: float,
                  skeleton: Skeleton | None = None) -> MotionSequence:
    """Standing sequence: feet planted the whole time, optional torso sway."""
    idle = GaitParams(stride_hz=params.stride_hz, stride_len=0.0, turn_rate=0.0,
                      sway=params.sway, lift=0.0, duty=1.0,
                      base_height=params.base_height, bob=min(params.bob, 0.4))
    return generate_walk(idle, frames, fps, skeleton)


def sample_params(rng: np.random.Generator, config: SynthConfig, idle: bool) -> GaitParams:
    u = lambda lo_hi: rng.uniform(*lo_hi)
    if idle:
        return GaitParams(stride_hz=u(config.stride_hz_range), stride_len=0.0,
                          turn_rate=0.0, sway=u(config.sway_range), lift=0.0, duty=1.0,
                          base_height=u((85.0, 87.5)), bob=0.3)
    return GaitParams(stride_hz=u(config.stride_hz_range),
                      stride_len=u(config.stride_len_range),
                      turn_rate=u(config.turn_range),
                      sway=u(config.sway_range),
                      lift=u(config.lift_range),
                      base_height=u(config.height_range))


def synth_dataset(config: SynthConfig) -> list:
    """Deterministic-per-seed dataset of gait sequences."""
    sk = biped_skeleton()
    out = []
    for i in range(config.n_sequences):
        rng = np.random.default_rng([config.seed, i])
        idle = (i % max(round(1 / config.idle_fraction), 1) == 0) if config.idle_fraction > 0 else False
        params = sample_params(rng, config, idle)
        gen = generate_idle if idle else generate_walk
        out.append(gen(params, config.frames, config.fps, sk))
    return out
