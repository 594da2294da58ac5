"""Single-sequence neural motion field: an MLP with positional time encoding
mapping normalized time to per-joint 6D rotations and the root orientation.

Fitting minimizes the weighted reconstruction loss (rotation geodesic, root
orientation geodesic, L1 on FK joint positions) over the sequence's integer
frames. Because the field is continuous in t, a fitted model can be sampled
at any frame rate afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .checkpoint import load_checkpoint, save_checkpoint
from .encoding import PositionalEncodingConfig, encode_time, frame_times
from .kinematics import Skeleton
from .losses import LossWeights, reconstruction_terms
from .motion import MotionSequence
from .nn import MLP, cosine_lr
from .rotations import IDENTITY_6D, rot6d_to_matrix

CHECKPOINT_KIND = "nemf-single-v1"


class FitDivergedError(RuntimeError):
    def __init__(self, epoch: int):
        self.epoch = epoch
        super().__init__(f"non-finite loss at epoch {epoch}")


@dataclass
class FieldConfig:
    n_joints: int
    frames: int
    fps: float
    encoding: PositionalEncodingConfig = field(default_factory=PositionalEncodingConfig)
    hidden: tuple = (256, 256, 256)
    seed: int = 0

    @property
    def out_dim(self) -> int:
        return 6 * self.n_joints + 6

    def to_dict(self) -> dict:
        return {"n_joints": self.n_joints, "frames": self.frames, "fps": self.fps,
                "encoding": self.encoding.to_dict(), "hidden": list(self.hidden),
                "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "FieldConfig":
        return cls(n_joints=int(d["n_joints"]), frames=int(d["frames"]), fps=float(d["fps"]),
                   encoding=PositionalEncodingConfig.from_dict(d["encoding"]),
                   hidden=tuple(d["hidden"]), seed=int(d["seed"]))


@dataclass
class FitConfig:
    epochs: int = 2500
    lr: float = 2e-3
    lr_end: float = 1e-5  # cosine decay target; set equal to lr for constant rate
    weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 0

    def to_dict(self) -> dict:
        return {"epochs": self.epochs, "lr": self.lr, "lr_end": self.lr_end,
                "weights": self.weights.to_dict(), "seed": self.seed}



class FieldModel:
    """Decoder parameters plus the skeleton and root track of the fitted clip."""

    def __init__(self, config: FieldConfig, skeleton: Skeleton,
                 root_track: np.ndarray | None = None):
        self.config = config
        self.skeleton = skeleton
        self.params = ad.ParamStore()
        rng = np.random.default_rng(config.seed)
        sizes = (config.encoding.dim, *config.hidden, config.out_dim)
        self.mlp = MLP(self.params, "mlp", sizes, rng, activation="tanh")
        self.root_track = (np.zeros((config.frames, 3)) if root_track is None
                           else np.asarray(root_track, dtype=np.float64))

    def forward(self, t_norm) -> tuple[ad.Node, ad.Node]:
        """Field evaluation as graph nodes: (xr (N, J, 6), ro (N, 6))."""
        t = ad.lift(t_norm)
        n = t.value.size
        feats = encode_time(t, self.config.encoding)
        out = self.mlp(feats)
        j = self.config.n_joints
        # identity offset keeps freshly initialized outputs decodable
        xr = ad.reshape(out[:, :6 * j], (n, j, 6)) + ad.constant(IDENTITY_6D)
        ro = out[:, 6 * j:] + ad.constant(IDENTITY_6D)
        return xr, ro

    def save(self, path) -> None:
        save_checkpoint(path, CHECKPOINT_KIND, self.config.to_dict(),
                        self.params.state_dict(),
                        extra={"skeleton": self.skeleton.to_dict(),
                               "root_track": self.root_track.tolist()})

    @classmethod
    def load(cls, path) -> "FieldModel":
        payload = load_checkpoint(path, expect_kind=CHECKPOINT_KIND)
        model = cls(FieldConfig.from_dict(payload["config"]),
                    Skeleton.from_dict(payload["extra"]["skeleton"]),
                    np.asarray(payload["extra"]["root_track"]))
        model.params.load_state_dict(payload["params"])
        return model


def field_forward(model: FieldModel, t_norm) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic field evaluation: (xr (N, J, 6), ro (N, 6)) arrays."""
    with model.params.frozen():
        xr, ro = model.forward(np.asarray(t_norm, dtype=np.float64))
    return xr.value, ro.value


def fit(seq: MotionSequence, hyper: FitConfig | None = None,
        encoding: PositionalEncodingConfig | None = None,
        hidden: tuple = (256, 256, 256),
        on_epoch=None) -> tuple[FieldModel, list]:
    """Fit a field to one sequence; returns the model and per-epoch history."""
    hyper = hyper or FitConfig()
    config = FieldConfig(n_joints=seq.n_joints, frames=seq.n_frames, fps=seq.fps,
                         encoding=encoding or PositionalEncodingConfig(),
                         hidden=hidden, seed=hyper.seed)
    model = FieldModel(config, seq.skeleton, root_track=seq.root_pos.copy())

    t_grid = frame_times(seq.n_frames)
    target_mats = seq.local_rotation_matrices()
    target_ro = seq.root_orientation_matrices()
    target_xp = seq.xp
    opt = ad.Adam(model.params, lr=hyper.lr)
    history = []
    for epoch in range(hyper.epochs):
        opt.config.lr = cosine_lr(hyper.lr, hyper.lr_end, epoch, hyper.epochs)
        model.params.zero_grad()
        xr, ro = model.forward(t_grid)
        terms = reconstruction_terms(seq.skeleton, xr, ro, target_mats, target_ro,
                                     target_xp, hyper.weights)
        total = terms["total"]
        if not np.isfinite(total.value):
            raise FitDivergedError(epoch)
        ad.backward(total)
        opt.step()
        record = {"epoch": epoch, "rot": terms["rot"].value.item(),
                  "ori": terms["ori"].value.item(), "pos": terms["pos"].value.item(),
                  "total": total.value.item()}
        history.append(record)
        if on_epoch is not None:
            on_epoch(record)
    return model, history


def sample_at_fps(model: FieldModel, target_fps: float) -> MotionSequence:
    """Evaluate the field across the training duration at a new frame rate.

    The root track recorded at fit time is linearly resampled so outputs
    stay a complete MotionSequence.
    """
    if target_fps <= 0:
        raise ValueError(f"target fps must be positive, got {target_fps}")
    duration = (model.config.frames - 1) / model.config.fps
    t_out = max(int(round(duration * target_fps)) + 1, 2)
    t_norm = -1.0 + 2.0 * np.arange(t_out) / (t_out - 1)
    xr, ro = field_forward(model, t_norm)
    src = np.arange(model.config.frames)
    pos = np.stack([np.interp(np.linspace(0, model.config.frames - 1, t_out), src,
                              model.root_track[:, i]) for i in range(3)], axis=1)
    fps_actual = (t_out - 1) / duration
    return MotionSequence.from_rotations(model.skeleton, fps_actual, xr, ro, pos)


def mean_per_joint_speed(seq: MotionSequence) -> float:
    """Mean norm of per-joint local velocities (cm/s), the smoothness metric."""
    return float(np.linalg.norm(seq.xpv, axis=-1).mean())
