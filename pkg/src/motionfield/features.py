"""Per-frame feature matrices consumed by the encoders and the root
predictor, with fixed normalization scales so channels land near unit range.

The differentiable builder reconstructs the same features from decoded
rotations, so optimization energies can flow gradients through them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .kinematics import Skeleton, angular_velocity, finite_difference_velocity, forward_kinematics
from .motion import MotionSequence
from .rotations import rot6d_to_matrix


@dataclass
class FeatureScales:
    pos: float = 100.0   # cm
    vel: float = 200.0   # cm/s
    ang: float = 10.0    # rad/s

    def to_dict(self) -> dict:
        return {"pos": self.pos, "vel": self.vel, "ang": self.ang}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureScales":
        return cls(**d)


def feature_dim(n_joints: int) -> int:
    return n_joints * 15


def local_feature_matrix(seq: MotionSequence, scales: FeatureScales) -> np.ndarray:
    """(T, J*15) scaled local state: positions, velocities, 6D, angular rates."""
    t = seq.n_frames
    return np.concatenate([
        seq.xp.reshape(t, -1) / scales.pos,
        seq.xpv.reshape(t, -1) / scales.vel,
        seq.xr.reshape(t, -1),
        seq.xrv.reshape(t, -1) / scales.ang,
    ], axis=1)


def decoded_local_features(skeleton: Skeleton, xr: ad.Node, fps: float,
                           scales: FeatureScales) -> ad.Node:
    """Differentiable version of local_feature_matrix from decoded xr."""
    t = xr.value.shape[0]
    mats = rot6d_to_matrix(xr)
    xp = forward_kinematics(skeleton, mats, ad.constant(np.zeros((t, 3))))
    xpv = finite_difference_velocity(xp, 1.0 / fps)
    xrv = angular_velocity(mats, 1.0 / fps)
    return ad.concat([
        ad.reshape(xp, (t, 3 * skeleton.n_joints)) / scales.pos,
        ad.reshape(xpv, (t, 3 * skeleton.n_joints)) / scales.vel,
        ad.reshape(xr, (t, 6 * skeleton.n_joints)),
        ad.reshape(xrv, (t, 3 * skeleton.n_joints)) / scales.ang,
    ], axis=1)
