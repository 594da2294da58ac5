"""BVH ingestion (HIERARCHY/MOTION subset, Euler rotation channels).

Files are assumed Y-up (the common BVH convention) and are converted to
the internal Z-up world on load unless up="z". Offsets and root
translations are multiplied by `scale` to land in centimeters.
"""

from __future__ import annotations

import numpy as np

from .kinematics import Skeleton
from .motion import MotionSequence, canonicalize
from .rotations import IDENTITY_6D, euler_to_matrix, matrix_to_rot6d

# world change of basis: file (x, y-up, z) -> internal (-x, z-up -> y, y -> z)
_Y_UP_TO_Z_UP = np.array([
    [-1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.0, 1.0, 0.0],
])

_FOOT_HINTS = ("foot", "toe", "ankle")


class BvhError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")


class _Tokens:
    def __init__(self, text: str):
        self.items = []  # (token, line_number)
        for ln, line in enumerate(text.splitlines(), start=1):
            for tok in line.split():
                self.items.append((tok, ln))
        self.pos = 0

    def peek(self):
        if self.pos >= len(self.items):
            raise BvhError("unexpected end of file")
        return self.items[self.pos]

    def next(self, expect: str | None = None):
        tok, ln = self.peek()
        self.pos += 1
        if expect is not None and tok.upper() != expect.upper():
            raise BvhError(f"expected {expect!r}, found {tok!r}", ln)
        return tok, ln

    def next_float(self):
        tok, ln = self.next()
        try:
            return float(tok), ln
        except ValueError:
            raise BvhError(f"expected a number, found {tok!r}", ln) from None

    def next_int(self):
        val, ln = self.next_float()
        return int(val), ln

    def exhausted(self):
        return self.pos >= len(self.items)


class _Joint:
    def __init__(self, name, parent):
        self.name = name
        self.parent = parent
        self.offset = np.zeros(3)
        self.channels = []


def _parse_joint(tokens: _Tokens, name: str, parent: int, joints: list) -> None:
    index = len(joints)
    joint = _Joint(name, parent)
    joints.append(joint)
    tokens.next(expect="{")
    while True:
        tok, ln = tokens.peek()
        up = tok.upper()
        if up == "OFFSET":
            tokens.next()
            joint.offset = np.array([tokens.next_float()[0] for _ in range(3)])
        elif up == "CHANNELS":
            tokens.next()
            n, _ = tokens.next_int()
            joint.channels = [tokens.next()[0] for _ in range(n)]
        elif up == "JOINT":
            tokens.next()
            child, _ = tokens.next()
            _parse_joint(tokens, child, index, joints)
        elif up == "END":
            tokens.next()
            tokens.next()  # "Site"
            tokens.next(expect="{")
            tokens.next(expect="OFFSET")
            for _ in range(3):
                tokens.next_float()
            tokens.next(expect="}")
        elif tok == "}":
            tokens.next()
            return
        else:
            raise BvhError(f"unexpected token {tok!r} in joint block", ln)


def _rotation_order(channels: list, line_hint: int | None = None) -> tuple[str, list]:
    """(order string, indices of the rotation channels within the channel list)."""
    order = ""
    idx = []
    for i, c in enumerate(channels):
        cu = c.lower()
        if cu.endswith("rotation"):
            axis = cu[0].upper()
            if axis not in "XYZ":
                raise BvhError(f"unknown channel {c!r}", line_hint)
            order += axis
            idx.append(i)
    if len(order) != 3:
        raise BvhError(f"expected 3 rotation channels, found {len(order)}", line_hint)
    return order, idx


def load_bvh(path, scale: float = 1.0, up: str = "y") -> MotionSequence:
    """Parse a BVH file into a canonicalized MotionSequence."""
    with open(path) as fh:
        text = fh.read()
    tokens = _Tokens(text)
    tokens.next(expect="HIERARCHY")
    tokens.next(expect="ROOT")
    root_name, _ = tokens.next()
    joints: list[_Joint] = []
    _parse_joint(tokens, root_name, -1, joints)

    tokens.next(expect="MOTION")
    tokens.next(expect="Frames:")
    n_frames, _ = tokens.next_int()
    tok, ln = tokens.next(expect="Frame")
    tokens.next(expect="Time:")
    frame_time, _ = tokens.next_float()
    if frame_time <= 0:
        raise BvhError(f"frame time must be positive, got {frame_time}", ln)
    if n_frames < 2:
        raise BvhError(f"need at least 2 frames, got {n_frames}", ln)

    total_channels = sum(len(j.channels) for j in joints)
    values = np.zeros((n_frames, total_channels))
    for f in range(n_frames):
        for c in range(total_channels):
            if tokens.exhausted():
                raise BvhError(
                    f"motion data ended early: expected {n_frames} frames, "
                    f"found {f} complete", tokens.items[-1][1] if tokens.items else None)
            values[f, c], _ = tokens.next_float()
    if not tokens.exhausted():
        tok, ln = tokens.peek()
        raise BvhError(
            f"trailing motion data: expected exactly {n_frames} frames", ln)

    conv = _Y_UP_TO_Z_UP if up.lower() == "y" else np.eye(3)
    j = len(joints)
    xr = np.zeros((n_frames, j, 6))
    root_pos = np.zeros((n_frames, 3))
    col = 0
    for ji, joint in enumerate(joints):
        block = values[:, col:col + len(joint.channels)]
        col += len(joint.channels)
        order, rot_idx = _rotation_order(joint.channels)
        angles = np.deg2rad(block[:, rot_idx])
        mats = conv @ euler_to_matrix(angles, order) @ conv.T
        xr[:, ji] = matrix_to_rot6d(mats)
        if ji == 0:
            pos_idx = {c.lower()[0]: i for i, c in enumerate(joint.channels)
                       if c.lower().endswith("position")}
            if pos_idx:
                p = np.zeros((n_frames, 3))
                for axis, i in pos_idx.items():
                    p[:, "xyz".index(axis)] = block[:, i]
                root_pos = (conv @ p.T).T * scale

    skeleton = Skeleton(
        names=[j.name for j in joints],
        parents=[j.parent for j in joints],
        offsets=np.stack([(conv @ j.offset) * scale for j in joints]),
        foot_joints=[j.name for j in joints
                     if any(h in j.name.lower() for h in _FOOT_HINTS)],
    )
    ro = np.tile(IDENTITY_6D, (n_frames, 1))
    raw = MotionSequence.from_rotations(skeleton, 1.0 / frame_time, xr, ro, root_pos)
    return canonicalize(raw)
