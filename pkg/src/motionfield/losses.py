"""Reconstruction losses over rotations, orientations, and FK positions,
plus the diagonal-Gaussian KL term.

All terms are means over their elements (not sums), so the default weights
are stable across sequence lengths and joint counts. Angles are radians;
positions are cm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .kinematics import Skeleton, forward_kinematics
from .rotations import geodesic_distance, rot6d_to_matrix


@dataclass
class LossWeights:
    rot: float = 1.0
    ori: float = 1.0
    pos: float = 0.1

    def to_dict(self) -> dict:
        return {"rot": self.rot, "ori": self.ori, "pos": self.pos}

    @classmethod
    def from_dict(cls, d: dict) -> "LossWeights":
        return cls(**d)


def rotation_loss(pred_mats, target_mats) -> ad.Node:
    """Mean geodesic distance (radians) between matched rotations."""
    return ad.mean(geodesic_distance(pred_mats, ad.lift(target_mats)))


def position_loss(pred_pos, target_pos) -> ad.Node:
    """Mean absolute coordinate difference (cm)."""
    return ad.mean(ad.absolute(ad.lift(pred_pos) - ad.lift(target_pos)))


def reconstruction_terms(skeleton: Skeleton, pred_xr: ad.Node, pred_ro: ad.Node,
                         target_xr_mats, target_ro_mats, target_xp,
                         weights: LossWeights) -> dict:
    """The three reconstruction terms plus their weighted total, as Nodes.

    pred_xr is (T, J, 6), pred_ro is (T, 6); targets are precomputed
    matrices / positions for the same frames.
    """
    t = pred_xr.value.shape[0]
    pred_mats = rot6d_to_matrix(pred_xr)
    pred_ro_mats = rot6d_to_matrix(pred_ro)
    l_rot = rotation_loss(pred_mats, target_xr_mats)
    l_ori = rotation_loss(pred_ro_mats, target_ro_mats)
    pred_xp = forward_kinematics(skeleton, pred_mats, ad.constant(np.zeros((t, 3))))
    l_pos = position_loss(pred_xp, target_xp)
    total = weights.rot * l_rot + weights.ori * l_ori + weights.pos * l_pos
    return {"rot": l_rot, "ori": l_ori, "pos": l_pos, "total": total}


def kl_divergence(mu: ad.Node, logvar: ad.Node) -> ad.Node:
    """KL(N(mu, diag(exp(logvar))) || N(0, I)), summed over dimensions."""
    return 0.5 * ad.sum_(ad.mul(mu, mu) + ad.exp(logvar) - 1.0 - logvar)
