"""Rotation representations: 6D <-> matrix <-> quaternion, geodesic distance,
SLERP, angular velocity.

The differentiable functions (rot6d_to_matrix, geodesic_distance, angular
velocities) are type-preserving: feed them autodiff Nodes and they return
Nodes; feed plain arrays and they return arrays. Quaternion utilities are
numpy-only since no gradients ever flow through them.

6D layout: the first three floats are column 0 of the rotation matrix, the
last three are column 1. Column 2 is recovered as their cross product.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad


class RotationError(ValueError):
    pass


def _wrap(fn):
    """Run fn over lifted Nodes; unwrap the result when no input was a Node."""

    def run(*args, **kwargs):
        graph = any(isinstance(a, ad.Node) for a in args)
        out = fn(*[ad.lift(a) for a in args], **kwargs)
        return out if graph else out.value

    return run


def _cross(a: ad.Node, b: ad.Node) -> ad.Node:
    """Cross product over the last axis (size 3)."""
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    return ad.stack([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0], axis=-1)


def _normalize(v: ad.Node, eps=1e-12) -> ad.Node:
    n = ad.sqrt(ad.sum_(v * v, axis=-1, keepdims=True) + eps)
    return v / n


@_wrap
def rot6d_to_matrix(r6: ad.Node) -> ad.Node:
    """Orthonormalize a (..., 6) representation into (..., 3, 3) matrices.

    Gram-Schmidt on the two stored columns; the third column is their cross
    product, so the result is always a proper rotation when the columns are
    linearly independent.
    """
    a1 = r6[..., 0:3]
    a2 = r6[..., 3:6]
    cross_norm = np.linalg.norm(np.cross(a1.value, a2.value), axis=-1)
    if np.any(cross_norm <= 1e-9):
        raise RotationError("degenerate 6D rotation: stored columns are parallel")
    b1 = _normalize(a1)
    b2 = _normalize(a2 - ad.sum_(a2 * b1, axis=-1, keepdims=True) * b1)
    b3 = _cross(b1, b2)
    return ad.stack([b1, b2, b3], axis=-1)


def matrix_to_rot6d(mat):
    """Keep the first two columns of (..., 3, 3) matrices as (..., 6)."""
    if isinstance(mat, ad.Node):
        return ad.concat([mat[..., :, 0], mat[..., :, 1]], axis=-1)
    mat = np.asarray(mat, dtype=np.float64)
    return np.concatenate([mat[..., :, 0], mat[..., :, 1]], axis=-1)


@_wrap
def geodesic_distance(r1: ad.Node, r2: ad.Node) -> ad.Node:
    """Angle in [0, pi] of the relative rotation r1 * r2^T, batched."""
    rel = ad.matmul(r1, ad.transpose(r2, axes=_swap_last_two(r2.value.ndim)))
    trace = ad.sum_(rel[..., (0, 1, 2), (0, 1, 2)], axis=-1)
    return ad.arccos((trace - 1.0) * 0.5)


def _swap_last_two(ndim: int) -> tuple:
    axes = list(range(ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return tuple(axes)


IDENTITY_6D = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])


def rotation_z(angle):
    """Rotation about the +Z (up) axis; batched over leading dims of angle."""
    angle = np.asarray(angle, dtype=np.float64)
    c, s = np.cos(angle), np.sin(angle)
    out = np.zeros(angle.shape + (3, 3))
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    out[..., 2, 2] = 1.0
    return out


def rotation_x(angle):
    angle = np.asarray(angle, dtype=np.float64)
    c, s = np.cos(angle), np.sin(angle)
    out = np.zeros(angle.shape + (3, 3))
    out[..., 0, 0] = 1.0
    out[..., 1, 1] = c
    out[..., 1, 2] = -s
    out[..., 2, 1] = s
    out[..., 2, 2] = c
    return out


def rotation_y(angle):
    angle = np.asarray(angle, dtype=np.float64)
    c, s = np.cos(angle), np.sin(angle)
    out = np.zeros(angle.shape + (3, 3))
    out[..., 0, 0] = c
    out[..., 0, 2] = s
    out[..., 1, 1] = 1.0
    out[..., 2, 0] = -s
    out[..., 2, 2] = c
    return out


def euler_to_matrix(angles, order: str):
    """Compose intrinsic Euler rotations in the given channel order.

    angles is (..., len(order)) in radians; order is a string like "ZXY"
    giving the application order R = R_c0 @ R_c1 @ R_c2.
    """
    basis = {"X": rotation_x, "Y": rotation_y, "Z": rotation_z}
    angles = np.asarray(angles, dtype=np.float64)
    out = None
    for i, axis in enumerate(order):
        r = basis[axis](angles[..., i])
        out = r if out is None else out @ r
    return out


def axis_angle_of(mat) -> tuple[np.ndarray, np.ndarray]:
    """(axis, angle) of (..., 3, 3) rotations; axis is zero for angle ~ 0."""
    mat = np.asarray(mat, dtype=np.float64)
    trace = mat[..., 0, 0] + mat[..., 1, 1] + mat[..., 2, 2]
    angle = np.arccos(np.clip((trace - 1.0) * 0.5, -1.0, 1.0))
    skew = np.stack([
        mat[..., 2, 1] - mat[..., 1, 2],
        mat[..., 0, 2] - mat[..., 2, 0],
        mat[..., 1, 0] - mat[..., 0, 1],
    ], axis=-1)
    s = np.linalg.norm(skew, axis=-1, keepdims=True)
    axis = np.where(s > 1e-12, skew / np.where(s > 1e-12, s, 1.0), 0.0)
    return axis, angle


@_wrap
def log_map(rel: ad.Node) -> ad.Node:
    """Rotation vector (axis * angle) of (..., 3, 3) rotations.

    Uses angle / (2 sin angle) applied to the skew part, with a smooth
    guard so the small-angle limit reduces to skew / 2.
    """
    trace = ad.sum_(rel[..., (0, 1, 2), (0, 1, 2)], axis=-1)
    c = (trace - 1.0) * 0.5
    angle = ad.arccos(c)
    # sin(angle) via sqrt(1 - c^2); the epsilon keeps the quotient finite
    # and yields the correct 1/2 factor as angle -> 0
    factor = angle / (2.0 * ad.sqrt(1.0 - ad.minimum(c * c, ad.constant(1.0 - 1e-14)) + 1e-14))
    skew = ad.stack([
        rel[..., 2, 1] - rel[..., 1, 2],
        rel[..., 0, 2] - rel[..., 2, 0],
        rel[..., 1, 0] - rel[..., 0, 1],
    ], axis=-1)
    return skew * _expand_last(factor)


def _expand_last(x: ad.Node) -> ad.Node:
    return ad.reshape(x, x.value.shape + (1,))


# ---------------------------------------------------------------------------
# quaternions (numpy only)


def quat_normalize(q):
    q = np.asarray(q, dtype=np.float64)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def quat_canonical(q):
    """Flip sign so w >= 0 (per quaternion)."""
    q = np.asarray(q, dtype=np.float64)
    sign = np.where(q[..., 0:1] < 0, -1.0, 1.0)
    return q * sign


def quat_to_matrix(q):
    w, x, y, z = (np.asarray(q, dtype=np.float64)[..., i] for i in range(4))
    out = np.empty(np.shape(w) + (3, 3))
    out[..., 0, 0] = 1 - 2 * (y * y + z * z)
    out[..., 0, 1] = 2 * (x * y - w * z)
    out[..., 0, 2] = 2 * (x * z + w * y)
    out[..., 1, 0] = 2 * (x * y + w * z)
    out[..., 1, 1] = 1 - 2 * (x * x + z * z)
    out[..., 1, 2] = 2 * (y * z - w * x)
    out[..., 2, 0] = 2 * (x * z - w * y)
    out[..., 2, 1] = 2 * (y * z + w * x)
    out[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return out


def matrix_to_quat(mat):
    """Shepperd's method, hemisphere-canonicalized (w >= 0)."""
    mat = np.asarray(mat, dtype=np.float64)
    flat = mat.reshape(-1, 3, 3)
    out = np.empty((flat.shape[0], 4))
    for i, m in enumerate(flat):
        tr = m[0, 0] + m[1, 1] + m[2, 2]
        if tr > 0:
            s = np.sqrt(tr + 1.0) * 2
            out[i] = [0.25 * s, (m[2, 1] - m[1, 2]) / s,
                      (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
            s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
            out[i] = [(m[2, 1] - m[1, 2]) / s, 0.25 * s,
                      (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        elif m[1, 1] > m[2, 2]:
            s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
            out[i] = [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s,
                      0.25 * s, (m[1, 2] + m[2, 1]) / s]
        else:
            s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
            out[i] = [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s,
                      (m[1, 2] + m[2, 1]) / s, 0.25 * s]
    return quat_canonical(quat_normalize(out)).reshape(mat.shape[:-2] + (4,))


def slerp(q1, q2, u: float):
    """Great-arc interpolation between unit quaternions.

    Takes the shortest path (q2 is sign-corrected) and falls back to a
    normalized lerp when the arc is tiny.
    """
    q1 = quat_normalize(q1)
    q2 = quat_normalize(q2)
    dot = float(np.dot(q1, q2))
    if dot < 0.0:
        q2 = -q2
        dot = -dot
    if dot > 1.0 - 1e-6:
        return quat_normalize((1.0 - u) * q1 + u * q2)
    theta = np.arccos(np.clip(dot, -1.0, 1.0))
    return (np.sin((1.0 - u) * theta) * q1 + np.sin(u * theta) * q2) / np.sin(theta)


def slerp_matrices(m1, m2, u: float):
    return quat_to_matrix(slerp(matrix_to_quat(m1), matrix_to_quat(m2), u))
