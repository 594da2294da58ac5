"""In-betweening baselines: per-joint SLERP between keyframes, and
inertialization (quintic offset decay) between two clips."""

from __future__ import annotations

import numpy as np

from .kinematics import Skeleton
from .motion import MotionSequence
from .rotations import matrix_to_quat, matrix_to_rot6d, quat_to_matrix, rot6d_to_matrix, slerp


class BaselineError(ValueError):
    pass


def slerp_inbetween(skeleton: Skeleton, keyframes: list, frames: int,
                    fps: float = 30.0) -> MotionSequence:
    """Fill a timeline from sparse keyframes.

    Joint rotations and the root orientation SLERP between bracketing
    keyframes; root translation is linear. Frames before the first or after
    the last keyframe hold the nearest pose. Keyframes are reproduced
    exactly at their own frames.
    """
    if len(keyframes) < 2:
        raise BaselineError(f"need at least 2 keyframes, got {len(keyframes)}")
    keys = sorted(keyframes, key=lambda k: k.frame)
    if keys[0].frame < 0 or keys[-1].frame >= frames:
        raise BaselineError("keyframe outside the requested frame range")
    j = skeleton.n_joints
    key_quats = [matrix_to_quat(rot6d_to_matrix(np.asarray(k.xr))) for k in keys]
    key_ro_quats = [matrix_to_quat(rot6d_to_matrix(np.asarray(k.ro))) for k in keys]

    xr = np.empty((frames, j, 6))
    ro = np.empty((frames, 6))
    root = np.empty((frames, 3))
    seg = 0
    for t in range(frames):
        while seg + 1 < len(keys) - 1 and keys[seg + 1].frame <= t:
            seg += 1
        a, b = keys[seg], keys[seg + 1]
        if t <= a.frame:
            u = 0.0
        elif t >= b.frame:
            u = 1.0
        else:
            u = (t - a.frame) / (b.frame - a.frame)
        for ji in range(j):
            q = slerp(key_quats[seg][ji], key_quats[seg + 1][ji], u)
            xr[t, ji] = matrix_to_rot6d(quat_to_matrix(q))
        ro[t] = matrix_to_rot6d(quat_to_matrix(slerp(key_ro_quats[seg], key_ro_quats[seg + 1], u)))
        root[t] = (1 - u) * a.root_pos + u * b.root_pos
    # pin the keyframes bit-exactly (slerp endpoints are only fp-close)
    for k, kq in zip(keys, key_quats):
        xr[k.frame] = np.asarray(k.xr)
        ro[k.frame] = np.asarray(k.ro)
        root[k.frame] = np.asarray(k.root_pos)
    return MotionSequence.from_rotations(skeleton, fps, xr, ro, root)


def _quintic_offset(x0: np.ndarray, v0: np.ndarray, total: float, tau: np.ndarray) -> np.ndarray:
    """Offset curve with h(0)=x0, h'(0)=v0, h''(0)=0 and h=h'=h''=0 at total."""
    t3, t4, t5 = total**3, total**4, total**5
    c3 = -(10.0 * x0 + 6.0 * v0 * total) / t3
    c4 = (15.0 * x0 + 8.0 * v0 * total) / t4
    c5 = -(6.0 * x0 + 3.0 * v0 * total) / t5
    tau = tau.reshape(-1, *([1] * x0.ndim))
    return (x0 + v0 * tau + c3 * tau**3 + c4 * tau**4 + c5 * tau**5)


def inertialize_inbetween(clip_a: MotionSequence, clip_b: MotionSequence,
                          gap_frames: int) -> MotionSequence:
    """Transition from the end of clip_a to the start of clip_b.

    The per-channel offset between the extrapolated source pose and the
    target pose decays along a quintic that reaches zero value, velocity,
    and acceleration at the blend end. The result covers the transition
    inclusively: frame 0 equals clip_a's last frame and the final frame
    equals clip_b's first, with gap_frames new frames in between.
    """
    if gap_frames < 1:
        raise BaselineError(f"gap must be at least 1 frame, got {gap_frames}")
    if clip_a.n_frames < 2:
        raise BaselineError("clip_a must provide at least 2 trailing frames")
    if clip_a.skeleton.names != clip_b.skeleton.names:
        raise BaselineError("clips use different skeletons")
    fps = clip_a.fps
    dt = 1.0 / fps

    def channels(seq, t):
        return np.concatenate([seq.xr[t].reshape(-1), seq.ro[t], seq.root_pos[t]])

    a_end = channels(clip_a, -1)
    a_prev = channels(clip_a, -2)
    b_start = channels(clip_b, 0)
    x0 = a_end - b_start
    v0 = (a_end - a_prev) / dt
    total = (gap_frames + 1) * dt
    tau = np.arange(gap_frames + 2) * dt
    offsets = _quintic_offset(x0, v0, total, tau)
    filled = b_start[None, :] + offsets

    j = clip_a.n_joints
    t_out = gap_frames + 2
    xr = filled[:, :6 * j].reshape(t_out, j, 6)
    ro = filled[:, 6 * j:6 * j + 6]
    root = filled[:, 6 * j + 6:]
    return MotionSequence.from_rotations(clip_a.skeleton, fps, xr, ro, root)
