"""Global motion predictor: root linear velocity and absolute root height
from the local motion state, plus trajectory integration.

Horizontal motion is predicted as a velocity in the canonical (root) frame,
rotated into the world by the root orientation, and integrated; height is
predicted absolutely per frame so the vertical channel cannot drift. The
network is a stack of dilated 1-D convolutions (receptive field ~31
frames), so predictions are local in time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .checkpoint import load_checkpoint, save_checkpoint
from .features import FeatureScales, decoded_local_features, feature_dim, local_feature_matrix
from .kinematics import Skeleton, finite_difference_velocity
from .motion import MotionSequence
from .nn import ConvStack, cosine_lr
from .rotations import rot6d_to_matrix

CHECKPOINT_KIND = "globalmotion-v1"

HEIGHT_SCALE = 100.0  # network predicts height/100 to keep outputs near unit
VELOCITY_SCALE = 100.0


class GlobalTrainingDivergedError(RuntimeError):
    pass


@dataclass
class GlobalMotionConfig:
    n_joints: int
    fps: float = 30.0
    hidden: int = 64
    dilations: tuple = (1, 2, 4, 8)
    kernel: int = 3
    scales: FeatureScales = field(default_factory=FeatureScales)
    seed: int = 0

    def to_dict(self) -> dict:
        return {"n_joints": self.n_joints, "fps": self.fps, "hidden": self.hidden,
                "dilations": list(self.dilations), "kernel": self.kernel,
                "scales": self.scales.to_dict(), "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "GlobalMotionConfig":
        return cls(n_joints=int(d["n_joints"]), fps=float(d["fps"]), hidden=int(d["hidden"]),
                   dilations=tuple(d["dilations"]), kernel=int(d["kernel"]),
                   scales=FeatureScales.from_dict(d["scales"]), seed=int(d["seed"]))

    @property
    def receptive_field(self) -> int:
        return 1 + (self.kernel - 1) * sum(self.dilations)


class GlobalMotionModel:
    def __init__(self, config: GlobalMotionConfig, skeleton: Skeleton):
        if skeleton.n_joints != config.n_joints:
            raise ValueError("skeleton joint count does not match config")
        self.config = config
        self.skeleton = skeleton
        self.params = ad.ParamStore()
        rng = np.random.default_rng(config.seed)
        c_in = feature_dim(config.n_joints)
        channels = (c_in,) + (config.hidden,) * (len(config.dilations) - 1) + (4,)
        self.stack = ConvStack(self.params, "conv", channels, rng,
                               kernel=config.kernel, stride=1, padding=None,
                               dilations=config.dilations, final_activation=False)

    def forward_canonical(self, local_feats) -> tuple[ad.Node, ad.Node]:
        """(velocity in the canonical frame (T, 3), height (T,)) as nodes."""
        feats = ad.lift(local_feats)
        out = ad.transpose(self.stack(ad.transpose(feats, (1, 0))), (1, 0))
        velocity = out[:, 0:3] * VELOCITY_SCALE
        height = out[:, 3] * HEIGHT_SCALE
        return velocity, height

    def save(self, path) -> None:
        save_checkpoint(path, CHECKPOINT_KIND, self.config.to_dict(),
                        self.params.state_dict(),
                        extra={"skeleton": self.skeleton.to_dict()})

    @classmethod
    def load(cls, path) -> "GlobalMotionModel":
        payload = load_checkpoint(path, expect_kind=CHECKPOINT_KIND)
        model = cls(GlobalMotionConfig.from_dict(payload["config"]),
                    Skeleton.from_dict(payload["extra"]["skeleton"]))
        model.params.load_state_dict(payload["params"])
        return model


def predict_root(model: GlobalMotionModel, local_feats, ro_6d):
    """World-frame root velocity (T, 3) and absolute height (T,).

    local_feats is the (T, J*15) scaled feature matrix; ro_6d the (T, 6)
    root orientation track. The canonical-frame prediction is rotated into
    the world by the root orientation frame by frame. Type-preserving over
    Nodes.
    """
    graph = isinstance(local_feats, ad.Node) or isinstance(ro_6d, ad.Node)
    v_canon, height = model.forward_canonical(local_feats)
    ro_mats = rot6d_to_matrix(ad.lift(ro_6d))
    t = v_canon.value.shape[0]
    v_world = ad.reshape(ad.matmul(ro_mats, ad.reshape(v_canon, (t, 3, 1))), (t, 3))
    if graph:
        return v_world, height
    return v_world.value, height.value


def predict_root_arrays(model: GlobalMotionModel, skeleton: Skeleton, xr: np.ndarray,
                        ro: np.ndarray, fps: float) -> tuple[np.ndarray, np.ndarray]:
    """predict_root for decoded rotation arrays (features built internally)."""
    with model.params.frozen():
        feats = decoded_local_features(skeleton, ad.constant(xr), fps, model.config.scales)
        v, h = predict_root(model, feats, ad.constant(ro))
    return v.value, h.value


def predict_root_sequence(model: GlobalMotionModel, seq: MotionSequence):
    return predict_root(model, local_feature_matrix(seq, model.config.scales), seq.ro)


def integrate_trajectory(velocities, heights, fps: float, origin):
    """Root positions: integrated horizontal velocity plus absolute height.

    r[t] = origin + sum_{s<t} v[s] / fps in x and y; z comes directly from
    heights (drift-free). Type-preserving over Nodes.
    """
    graph = isinstance(velocities, ad.Node) or isinstance(heights, ad.Node)
    v = ad.lift(velocities)
    h = ad.lift(heights)
    t = v.value.shape[0]
    origin = ad.lift(origin)
    steps = v[:, 0:2] * (1.0 / fps)
    zero = ad.constant(np.zeros((1, 2)))
    xy = ad.cumsum(ad.concat([zero, steps[: t - 1]], axis=0), axis=0)
    xy = xy + ad.reshape(origin[0:2], (1, 2))
    out = ad.concat([xy, ad.reshape(h, (t, 1))], axis=1)
    return out if graph else out.value


@dataclass
class GlobalTrainConfig:
    epochs: int = 80
    batch_size: int = 8
    lr: float = 1e-3
    lr_end: float = 5e-5
    integration_weight: float = 0.05  # L1 on integrated horizontal positions
    feature_noise: float = 0.0  # input jitter; hardens against decoded features
    seed: int = 0

    def to_dict(self) -> dict:
        return {"epochs": self.epochs, "batch_size": self.batch_size, "lr": self.lr,
                "lr_end": self.lr_end, "integration_weight": self.integration_weight,
                "feature_noise": self.feature_noise, "seed": self.seed}


def _sequence_targets(model: GlobalMotionModel, seq: MotionSequence):
    ro_mats = seq.root_orientation_matrices()
    v_world = finite_difference_velocity(seq.root_pos, 1.0 / seq.fps)
    v_canon = np.einsum("tji,tj->ti", ro_mats, v_world)
    return v_canon, seq.root_height


def train_global(model: GlobalMotionModel, dataset: list,
                 hyper: GlobalTrainConfig | None = None, on_epoch=None) -> list:
    """L1 regression on canonical velocity and height, plus integrated-path L1."""
    hyper = hyper or GlobalTrainConfig()
    if not dataset:
        raise ValueError("dataset is empty")
    rng = np.random.default_rng(hyper.seed)
    opt = ad.Adam(model.params, lr=hyper.lr)
    feats = [local_feature_matrix(s, model.config.scales) for s in dataset]
    targets = [_sequence_targets(model, s) for s in dataset]
    history = []
    for epoch in range(hyper.epochs):
        opt.config.lr = cosine_lr(hyper.lr, hyper.lr_end, epoch, hyper.epochs)
        order = rng.permutation(len(dataset))
        epoch_loss = 0.0
        for start in range(0, len(order), hyper.batch_size):
            idx = order[start:start + hyper.batch_size]
            model.params.zero_grad()
            batch_loss = None
            for i in idx:
                seq = dataset[i]
                v_gt, h_gt = targets[i]
                feat = feats[i]
                if hyper.feature_noise > 0:
                    feat = feat + hyper.feature_noise * rng.standard_normal(feat.shape)
                v_pred, h_pred = model.forward_canonical(ad.constant(feat))
                loss = (ad.mean(ad.absolute(v_pred - ad.constant(v_gt)))
                        + ad.mean(ad.absolute(h_pred - ad.constant(h_gt))))
                if hyper.integration_weight > 0:
                    ro_mats = ad.constant(seq.root_orientation_matrices())
                    t = seq.n_frames
                    v_world = ad.reshape(ad.matmul(ro_mats, ad.reshape(v_pred, (t, 3, 1))), (t, 3))
                    path = integrate_trajectory(v_world, h_pred, seq.fps, seq.root_pos[0])
                    loss = loss + hyper.integration_weight * ad.mean(
                        ad.absolute(path[:, 0:2] - ad.constant(seq.root_pos[:, 0:2])))
                batch_loss = loss if batch_loss is None else batch_loss + loss
            batch_loss = batch_loss * (1.0 / len(idx))
            if not np.isfinite(batch_loss.value):
                raise GlobalTrainingDivergedError(f"non-finite loss at epoch {epoch}")
            epoch_loss += batch_loss.value.item() * len(idx)
            ad.backward(batch_loss)
            opt.step()
        record = {"epoch": epoch, "loss": epoch_loss / len(dataset)}
        history.append(record)
        if on_epoch is not None:
            on_epoch(record)
    return history
