"""Evaluation metrics: paired reconstruction errors (MRE/MPE/MOE/MTE/FDE),
distribution metrics (FID, Diversity) over hand-crafted kinematic feature
vectors, and the foot-skating contact metric.

FID features here are deterministic kinematic statistics, not a learned
extractor, so absolute values are only comparable within this codebase.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .motion import MotionSequence


class MetricError(ValueError):
    pass


def _geodesic_exact(r1: np.ndarray, r2: np.ndarray) -> np.ndarray:
    """Relative rotation angle via atan2, which is numerically exact near
    zero (arccos would blow 1e-16 matrix noise up to 1e-4 degrees)."""
    rel = r1 @ np.swapaxes(r2, -1, -2)
    trace = rel[..., 0, 0] + rel[..., 1, 1] + rel[..., 2, 2]
    skew = np.stack([
        rel[..., 2, 1] - rel[..., 1, 2],
        rel[..., 0, 2] - rel[..., 2, 0],
        rel[..., 1, 0] - rel[..., 0, 1],
    ], axis=-1)
    return np.arctan2(0.5 * np.linalg.norm(skew, axis=-1), 0.5 * (trace - 1.0))


@dataclass
class ContactConfig:
    height_threshold: float = 3.0  # cm above ground
    speed_threshold: float = 2.0   # vertical cm/s

    def to_dict(self) -> dict:
        return {"height_threshold": self.height_threshold,
                "speed_threshold": self.speed_threshold}


@dataclass
class MetricReport:
    """Per-metric values; None marks a metric that was not computed."""

    mre: float | None = None
    mpe: float | None = None
    moe: float | None = None
    mte: float | None = None
    fde: float | None = None
    fid: float | None = None
    diversity: float | None = None
    foot_skate: float | None = None
    counts: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_csv(self) -> str:
        names = ["mre", "mpe", "moe", "mte", "fde", "fid", "diversity", "foot_skate"]
        rows = ["metric,value,count"]
        for n in names:
            v = getattr(self, n)
            rows.append(f"{n},{'' if v is None else repr(v)},{self.counts.get(n, '')}")
        return "\n".join(rows) + "\n"


def _check_paired(pred: MotionSequence, gt: MotionSequence) -> None:
    if pred.n_frames != gt.n_frames:
        raise MetricError(f"frame counts differ: {pred.n_frames} vs {gt.n_frames}")
    if pred.skeleton.names != gt.skeleton.names:
        raise MetricError("sequences use different skeletons")


def mre(pred: MotionSequence, gt: MotionSequence) -> float:
    """Mean geodesic distance over all joints and frames, degrees."""
    _check_paired(pred, gt)
    d = _geodesic_exact(pred.local_rotation_matrices(), gt.local_rotation_matrices())
    return float(np.degrees(d.mean()))


def moe(pred: MotionSequence, gt: MotionSequence) -> float:
    """Mean geodesic distance on the root orientation, degrees."""
    _check_paired(pred, gt)
    d = _geodesic_exact(pred.root_orientation_matrices(), gt.root_orientation_matrices())
    return float(np.degrees(d.mean()))


def mpe(pred: MotionSequence, gt: MotionSequence) -> float:
    """Mean Euclidean distance on root-aligned joint positions, cm."""
    _check_paired(pred, gt)
    return float(np.linalg.norm(pred.xp - gt.xp, axis=-1).mean())


def mte(pred: MotionSequence, gt: MotionSequence) -> float:
    """Mean Euclidean distance on the root translation, cm."""
    _check_paired(pred, gt)
    return float(np.linalg.norm(pred.root_pos - gt.root_pos, axis=-1).mean())


def fde(pred: MotionSequence, gt: MotionSequence) -> float:
    """Mean global joint displacement at the final frame, cm."""
    _check_paired(pred, gt)
    pw = pred.world_positions()[-1]
    gw = gt.world_positions()[-1]
    return float(np.linalg.norm(pw - gw, axis=-1).mean())


# ---------------------------------------------------------------------------
# feature vectors and distribution metrics

SPEED_HIST_BINS = np.linspace(0.0, 160.0, 9)  # cm/s, 8 bins


def feature_vector(seq: MotionSequence) -> np.ndarray:
    """Fixed-length kinematic descriptor of one sequence.

    Concatenates per-joint mean and std of local positions (cm) and local
    velocities (cm/s), an 8-bin histogram of horizontal root speed
    (fraction of frames per bin), and per-joint mean angular speeds (rad/s).
    """
    t = seq.n_frames
    root_v = np.diff(seq.root_pos[:, :2], axis=0) * seq.fps
    speeds = np.linalg.norm(root_v, axis=1)
    hist = np.histogram(np.clip(speeds, 0, SPEED_HIST_BINS[-1] - 1e-9),
                        bins=SPEED_HIST_BINS)[0] / max(t - 1, 1)
    ang = np.linalg.norm(seq.xrv, axis=-1).mean(axis=0)
    return np.concatenate([
        seq.xp.mean(axis=0).reshape(-1),
        seq.xp.std(axis=0).reshape(-1),
        seq.xpv.mean(axis=0).reshape(-1),
        seq.xpv.std(axis=0).reshape(-1),
        hist,
        ang,
    ])


def _gaussian_stats(features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mu = features.mean(axis=0)
    centered = features - mu
    cov = centered.T @ centered / max(len(features) - 1, 1)
    return mu, np.atleast_2d(cov)


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh((mat + mat.T) * 0.5)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_gaussian(mu_a, cov_a, mu_b, cov_b, eps: float = 1e-6) -> float:
    """Frechet distance between two Gaussians.

    The trace of (cov_a cov_b)^(1/2) is computed from the eigenvalues of
    the symmetrized product cov_a^(1/2) cov_b cov_a^(1/2); negatives are
    clamped at zero. Covariances are regularized with eps * I so degenerate
    inputs stay well-posed.
    """
    mu_a, mu_b = np.asarray(mu_a, dtype=float), np.asarray(mu_b, dtype=float)
    cov_a = np.atleast_2d(np.asarray(cov_a, dtype=float)) + eps * np.eye(len(mu_a))
    cov_b = np.atleast_2d(np.asarray(cov_b, dtype=float)) + eps * np.eye(len(mu_b))
    # tr((cov_a cov_b)^(1/2)) equals the nuclear norm of sqrt_a sqrt_b,
    # which is exact when both sets coincide
    tr_sqrt = np.linalg.svd(_psd_sqrt(cov_a) @ _psd_sqrt(cov_b), compute_uv=False).sum()
    diff = mu_a - mu_b
    return float(diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2.0 * tr_sqrt)


def frechet_distance(features_a: np.ndarray, features_b: np.ndarray) -> float:
    """Frechet distance between Gaussian fits of two feature matrices."""
    mu_a, cov_a = _gaussian_stats(np.atleast_2d(features_a))
    mu_b, cov_b = _gaussian_stats(np.atleast_2d(features_b))
    return frechet_gaussian(mu_a, cov_a, mu_b, cov_b)


def fid(set_a: list, set_b: list) -> float:
    """Frechet distance between the feature distributions of two motion sets."""
    if len(set_a) < 2 or len(set_b) < 2:
        raise MetricError("fid needs at least 2 sequences per set")
    fa = np.stack([feature_vector(s) for s in set_a])
    fb = np.stack([feature_vector(s) for s in set_b])
    return frechet_distance(fa, fb)


def diversity(motions: list, seed: int = 0) -> float:
    """Mean pairwise feature distance over a seeded random pairing."""
    if len(motions) < 2:
        raise MetricError("diversity needs at least 2 sequences")
    feats = np.stack([feature_vector(s) for s in motions])
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(motions))
    pairs = len(motions) // 2
    dists = [np.linalg.norm(feats[order[2 * i]] - feats[order[2 * i + 1]])
             for i in range(pairs)]
    return float(np.mean(dists))


def foot_skate(seq: MotionSequence, contact: ContactConfig | None = None) -> float:
    """Mean horizontal foot drift per contact frame, cm.

    A foot is in contact when its height is below the height threshold and
    its vertical speed is below the speed threshold. Returns 0 when no
    contact happens.
    """
    contact = contact or ContactConfig()
    feet = seq.skeleton.foot_indices()
    if not feet:
        raise MetricError("skeleton has no tagged foot joints")
    world = seq.world_positions()[:, feet]  # (T, F, 3)
    vz = np.gradient(world[:, :, 2], axis=0) * seq.fps
    contacts = (world[:, :, 2] < contact.height_threshold) & (np.abs(vz) < contact.speed_threshold)
    disp = np.linalg.norm(world[1:, :, :2] - world[:-1, :, :2], axis=-1)
    active = contacts[:-1]
    n = int(active.sum())
    if n == 0:
        return 0.0
    return float(disp[active].sum() / n)


def paired_report(pred: MotionSequence, gt: MotionSequence,
                  contact: ContactConfig | None = None) -> MetricReport:
    report = MetricReport(
        mre=mre(pred, gt), mpe=mpe(pred, gt), moe=moe(pred, gt),
        mte=mte(pred, gt), fde=fde(pred, gt))
    n = pred.n_frames
    report.counts = {"mre": n * pred.n_joints, "mpe": n * pred.n_joints,
                     "moe": n, "mte": n, "fde": pred.n_joints}
    try:
        report.foot_skate = foot_skate(pred, contact)
        report.counts["foot_skate"] = n - 1
    except MetricError as err:
        report.notes.append(str(err))
    return report


def set_report(set_a: list, set_b: list, seed: int = 0,
               contact: ContactConfig | None = None) -> MetricReport:
    """Distribution metrics: FID(A, B), Diversity(A), mean foot skate of A."""
    report = MetricReport(fid=fid(set_a, set_b), diversity=diversity(set_a, seed=seed))
    report.counts = {"fid": len(set_a) + len(set_b), "diversity": len(set_a) // 2}
    try:
        skates = [foot_skate(s, contact) for s in set_a]
        report.foot_skate = float(np.mean(skates))
        report.counts["foot_skate"] = len(set_a)
    except MetricError as err:
        report.notes.append(str(err))
    return report
