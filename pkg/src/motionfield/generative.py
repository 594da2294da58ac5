"""Generative neural motion field, trained as a VAE.

Two convolutional encoders produce separate posteriors: z_local from the
full local motion state and z_global from the root orientation track only.
The decoder is split the same way: the local head consumes
[time encoding, z_local, z_global] and emits joint rotations, while the
orientation head consumes [time encoding, z_global] only, so root
orientation behavior is controlled exclusively by z_global.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .checkpoint import load_checkpoint, save_checkpoint
from .encoding import PositionalEncodingConfig, encode_time, frame_times
from .features import FeatureScales, feature_dim, local_feature_matrix
from .kinematics import Skeleton
from .losses import LossWeights, kl_divergence, reconstruction_terms
from .motion import MotionSequence
from .nn import MLP, ConvStack, cosine_lr, tile_rows
from .rotations import IDENTITY_6D

CHECKPOINT_KIND = "generative-v1"


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        self.epoch = epoch
        super().__init__(f"training diverged at epoch {epoch}: loss {loss:.3e}")


@dataclass
class LatentCode:
    z_local: np.ndarray
    z_global: np.ndarray

    def __post_init__(self):
        self.z_local = np.asarray(self.z_local, dtype=np.float64)
        self.z_global = np.asarray(self.z_global, dtype=np.float64)
        if not (np.all(np.isfinite(self.z_local)) and np.all(np.isfinite(self.z_global))):
            raise ValueError("latent code must be finite")

    def to_dict(self) -> dict:
        return {"z_local": self.z_local.tolist(), "z_global": self.z_global.tolist()}


@dataclass
class PosteriorParams:
    mu_local: np.ndarray
    logvar_local: np.ndarray
    mu_global: np.ndarray
    logvar_global: np.ndarray

    @property
    def sigma_local(self) -> np.ndarray:
        return np.exp(0.5 * self.logvar_local)

    @property
    def sigma_global(self) -> np.ndarray:
        return np.exp(0.5 * self.logvar_global)

    def mean_code(self) -> LatentCode:
        return LatentCode(self.mu_local.copy(), self.mu_global.copy())


@dataclass
class GenerativeConfig:
    n_joints: int
    frames: int = 128
    fps: float = 30.0
    z_local: int = 64
    z_global: int = 8
    encoder_channels: tuple = (96, 96, 96)
    orient_encoder_channels: tuple = (32, 32, 32)
    decoder_hidden: tuple = (256, 256, 256)
    orient_hidden: tuple = (64, 64)
    encoding: PositionalEncodingConfig = field(default_factory=PositionalEncodingConfig)
    scales: FeatureScales = field(default_factory=FeatureScales)
    encoder_pool: str = "flatten"  # "flatten" keeps gait phase; "mean" does not
    seed: int = 0

    def to_dict(self) -> dict:
        return {"n_joints": self.n_joints, "frames": self.frames, "fps": self.fps,
                "z_local": self.z_local, "z_global": self.z_global,
                "encoder_channels": list(self.encoder_channels),
                "orient_encoder_channels": list(self.orient_encoder_channels),
                "decoder_hidden": list(self.decoder_hidden),
                "orient_hidden": list(self.orient_hidden),
                "encoding": self.encoding.to_dict(), "scales": self.scales.to_dict(),
                "encoder_pool": self.encoder_pool, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "GenerativeConfig":
        return cls(n_joints=int(d["n_joints"]), frames=int(d["frames"]), fps=float(d["fps"]),
                   z_local=int(d["z_local"]), z_global=int(d["z_global"]),
                   encoder_channels=tuple(d["encoder_channels"]),
                   orient_encoder_channels=tuple(d["orient_encoder_channels"]),
                   decoder_hidden=tuple(d["decoder_hidden"]),
                   orient_hidden=tuple(d["orient_hidden"]),
                   encoding=PositionalEncodingConfig.from_dict(d["encoding"]),
                   scales=FeatureScales.from_dict(d["scales"]),
                   encoder_pool=d.get("encoder_pool", "mean"), seed=int(d["seed"]))


class GenerativeModel:
    def __init__(self, config: GenerativeConfig, skeleton: Skeleton):
        if skeleton.n_joints != config.n_joints:
            raise ValueError("skeleton joint count does not match config")
        self.config = config
        self.skeleton = skeleton
        self.params = ad.ParamStore()
        rng = np.random.default_rng(config.seed)
        c = config
        c_in = feature_dim(c.n_joints)
        self.enc_local = ConvStack(self.params, "enc_local",
                                   (c_in, *c.encoder_channels), rng)
        self.enc_orient = ConvStack(self.params, "enc_orient",
                                    (6, *c.orient_encoder_channels), rng)
        t_out = self.enc_local.out_length(c.frames)
        local_head = c.encoder_channels[-1] * (t_out if c.encoder_pool == "flatten" else 1)
        orient_head = c.orient_encoder_channels[-1] * (t_out if c.encoder_pool == "flatten" else 1)
        self.enc_local_mu = MLP(self.params, "enc_local_mu", (local_head, c.z_local), rng)
        self.enc_local_logvar = MLP(self.params, "enc_local_logvar",
                                    (local_head, c.z_local), rng)
        self.enc_orient_mu = MLP(self.params, "enc_orient_mu", (orient_head, c.z_global), rng)
        self.enc_orient_logvar = MLP(self.params, "enc_orient_logvar",
                                     (orient_head, c.z_global), rng)
        dec_in = c.encoding.dim + c.z_local + c.z_global
        self.dec_local = MLP(self.params, "dec_local",
                             (dec_in, *c.decoder_hidden, 6 * c.n_joints), rng)
        self.dec_orient = MLP(self.params, "dec_orient",
                              (c.encoding.dim + c.z_global, *c.orient_hidden, 6), rng)

    # ------------------------------------------------------------------
    # encoding

    def _pad_features(self, feats: np.ndarray) -> tuple[np.ndarray, int]:
        t, c = feats.shape
        target = self.config.frames
        if t > target:
            raise ValueError(f"sequence has {t} frames; model expects at most {target}")
        if t < target:
            feats = np.concatenate([feats, np.zeros((target - t, c))], axis=0)
        return feats, t

    def _posterior_nodes(self, seq: MotionSequence):
        local, t_valid = self._pad_features(local_feature_matrix(seq, self.config.scales))
        orient, _ = self._pad_features(seq.ro)

        def head(stack, mu_head, logvar_head, matrix):
            h = stack(ad.constant(matrix.T))
            if self.config.encoder_pool == "flatten":
                # keeps gait phase; zero-padded tails reach the head only as
                # bias-derived constants, which the linear layer absorbs
                pooled = ad.reshape(h, (1, h.value.size))
            else:
                valid = stack.out_length(t_valid)
                pooled = ad.mean(h[:, :max(valid, 1)], axis=1)
                pooled = ad.reshape(pooled, (1, pooled.value.size))
            mu = ad.reshape(mu_head(pooled), (-1,))
            logvar = ad.reshape(logvar_head(pooled), (-1,))
            return mu, logvar

        mu_l, logvar_l = head(self.enc_local, self.enc_local_mu, self.enc_local_logvar, local)
        mu_g, logvar_g = head(self.enc_orient, self.enc_orient_mu, self.enc_orient_logvar, orient)
        return mu_l, logvar_l, mu_g, logvar_g

    # ------------------------------------------------------------------
    # decoding

    def decode_nodes(self, z_local: ad.Node, z_global: ad.Node, t_norm) -> tuple[ad.Node, ad.Node]:
        t = ad.lift(t_norm)
        n = t.value.size
        enc = encode_time(t, self.config.encoding)
        zl = tile_rows(z_local, n)
        zg = tile_rows(z_global, n)
        local_out = self.dec_local(ad.concat([enc, zl, zg], axis=1))
        j = self.config.n_joints
        xr = ad.reshape(local_out, (n, j, 6)) + ad.constant(IDENTITY_6D)
        orient_out = self.dec_orient(ad.concat([enc, zg], axis=1))
        ro = orient_out + ad.constant(IDENTITY_6D)
        return xr, ro

    # ------------------------------------------------------------------
    # persistence

    def save(self, path) -> None:
        save_checkpoint(path, CHECKPOINT_KIND, self.config.to_dict(),
                        self.params.state_dict(),
                        extra={"skeleton": self.skeleton.to_dict()})

    @classmethod
    def load(cls, path) -> "GenerativeModel":
        payload = load_checkpoint(path, expect_kind=CHECKPOINT_KIND)
        model = cls(GenerativeConfig.from_dict(payload["config"]),
                    Skeleton.from_dict(payload["extra"]["skeleton"]))
        model.params.load_state_dict(payload["params"])
        return model


def encode(model: GenerativeModel, seq: MotionSequence) -> PosteriorParams:
    """Posterior parameters for one sequence (deterministic)."""
    if seq.skeleton.names != model.skeleton.names:
        raise ValueError("sequence skeleton does not match the model's")
    with model.params.frozen():
        mu_l, logvar_l, mu_g, logvar_g = model._posterior_nodes(seq)
    return PosteriorParams(mu_l.value.copy(), logvar_l.value.copy(),
                           mu_g.value.copy(), logvar_g.value.copy())


def reparameterize(params: PosteriorParams, seed: int = 0) -> LatentCode:
    """z = mu + sigma * eps with eps from a seeded generator."""
    rng = np.random.default_rng(seed)
    eps_l = rng.standard_normal(params.mu_local.shape)
    eps_g = rng.standard_normal(params.mu_global.shape)
    return LatentCode(params.mu_local + params.sigma_local * eps_l,
                      params.mu_global + params.sigma_global * eps_g)


def decode(model: GenerativeModel, z: LatentCode, t_norm) -> tuple[np.ndarray, np.ndarray]:
    """(xr (N, J, 6), ro (N, 6)) arrays for a latent code at given times."""
    with model.params.frozen():
        xr, ro = model.decode_nodes(ad.constant(z.z_local), ad.constant(z.z_global),
                                    np.asarray(t_norm, dtype=np.float64))
    return xr.value, ro.value


def _reparam_node(mu: ad.Node, logvar: ad.Node, eps: np.ndarray) -> ad.Node:
    return mu + ad.exp(0.5 * logvar) * ad.constant(eps)


def elbo_terms(model: GenerativeModel, seq: MotionSequence, eps_local: np.ndarray,
               eps_global: np.ndarray, kl_weight: float,
               weights: LossWeights, kl_weight_global: float | None = None) -> dict:
    """Per-sequence ELBO pieces as graph nodes."""
    mu_l, logvar_l, mu_g, logvar_g = model._posterior_nodes(seq)
    z_l = _reparam_node(mu_l, logvar_l, eps_local)
    z_g = _reparam_node(mu_g, logvar_g, eps_global)
    t_grid = frame_times(seq.n_frames)
    xr, ro = model.decode_nodes(z_l, z_g, t_grid)
    rec = reconstruction_terms(model.skeleton, xr, ro, seq.local_rotation_matrices(),
                               seq.root_orientation_matrices(), seq.xp, weights)
    kl_l = kl_divergence(mu_l, logvar_l)
    kl_g = kl_divergence(mu_g, logvar_g)
    kl_w_g = kl_weight if kl_weight_global is None else kl_weight_global
    total = rec["total"] + kl_weight * kl_l + kl_w_g * kl_g
    return {"rec": rec, "kl_local": kl_l, "kl_global": kl_g, "total": total}


def elbo_loss(model: GenerativeModel, batch: list, kl_weight: float = 1e-3,
              seed: int = 0, weights: LossWeights | None = None) -> dict:
    """Scalar ELBO summary for a batch: L_rec, both KL terms, and the total."""
    weights = weights or LossWeights()
    rng = np.random.default_rng(seed)
    sums = {"rec": 0.0, "kl_local": 0.0, "kl_global": 0.0, "total": 0.0}
    with model.params.frozen():
        for seq in batch:
            eps_l = rng.standard_normal(model.config.z_local)
            eps_g = rng.standard_normal(model.config.z_global)
            terms = elbo_terms(model, seq, eps_l, eps_g, kl_weight, weights)
            sums["rec"] += terms["rec"]["total"].value.item()
            sums["kl_local"] += terms["kl_local"].value.item()
            sums["kl_global"] += terms["kl_global"].value.item()
            sums["total"] += terms["total"].value.item()
    n = max(len(batch), 1)
    out = {k: v / n for k, v in sums.items()}
    if not np.isfinite(out["total"]):
        raise TrainingDivergedError(-1, out["total"])
    return out


@dataclass
class TrainConfig:
    epochs: int = 60
    batch_size: int = 8
    lr: float = 1e-3
    lr_end: float = 5e-5
    kl_weight: float = 1e-3
    kl_weight_global: float | None = None  # defaults to kl_weight
    warmup_fraction: float = 0.25  # linear KL warm-up from zero
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    checkpoint_every: int = 0
    checkpoint_dir: str | None = None

    def to_dict(self) -> dict:
        return {"epochs": self.epochs, "batch_size": self.batch_size, "lr": self.lr,
                "lr_end": self.lr_end, "kl_weight": self.kl_weight,
                "kl_weight_global": self.kl_weight_global,
                "warmup_fraction": self.warmup_fraction,
                "seed": self.seed, "weights": self.weights.to_dict(),
                "checkpoint_every": self.checkpoint_every}


def train(model: GenerativeModel, dataset: list, hyper: TrainConfig | None = None,
          on_epoch=None) -> list:
    """Deterministic minibatch training; returns per-epoch history."""
    hyper = hyper or TrainConfig()
    if len(dataset) < 2:
        raise ValueError(f"need at least 2 sequences, got {len(dataset)}")
    rng = np.random.default_rng(hyper.seed)
    opt = ad.Adam(model.params, lr=hyper.lr)
    history = []
    warm_epochs = max(int(hyper.epochs * hyper.warmup_fraction), 1)
    for epoch in range(hyper.epochs):
        opt.config.lr = cosine_lr(hyper.lr, hyper.lr_end, epoch, hyper.epochs)
        warm = min(epoch / warm_epochs, 1.0)
        kl_w = hyper.kl_weight * warm
        kl_w_g = (hyper.kl_weight if hyper.kl_weight_global is None
                  else hyper.kl_weight_global) * warm
        order = rng.permutation(len(dataset))
        sums = {"rec": 0.0, "kl_local": 0.0, "kl_global": 0.0, "total": 0.0}
        for start in range(0, len(order), hyper.batch_size):
            idx = order[start:start + hyper.batch_size]
            model.params.zero_grad()
            batch_total = None
            for i in idx:
                seq = dataset[i]
                eps_l = rng.standard_normal(model.config.z_local)
                eps_g = rng.standard_normal(model.config.z_global)
                terms = elbo_terms(model, seq, eps_l, eps_g, kl_w, hyper.weights,
                                   kl_weight_global=kl_w_g)
                sums["rec"] += terms["rec"]["total"].value.item()
                sums["kl_local"] += terms["kl_local"].value.item()
                sums["kl_global"] += terms["kl_global"].value.item()
                sums["total"] += terms["total"].value.item()
                batch_total = terms["total"] if batch_total is None else batch_total + terms["total"]
            loss = batch_total * (1.0 / len(idx))
            if not np.isfinite(loss.value) or loss.value.item() > 1e6:
                raise TrainingDivergedError(epoch, loss.value.item())
            ad.backward(loss)
            opt.step()
        record = {k: v / len(dataset) for k, v in sums.items()}
        record["epoch"] = epoch
        record["kl_weight"] = kl_w
        history.append(record)
        if on_epoch is not None:
            on_epoch(record)
        if (hyper.checkpoint_every and hyper.checkpoint_dir
                and (epoch + 1) % hyper.checkpoint_every == 0):
            model.save(f"{hyper.checkpoint_dir}/generative_epoch{epoch + 1:04d}.json")
    return history


def decode_motion(model: GenerativeModel, z: LatentCode, frames: int | None = None,
                  fps: float | None = None, global_model=None,
                  origin=None) -> MotionSequence:
    """Decode a latent code to a full MotionSequence.

    The root trajectory comes from the global motion predictor when one is
    given; otherwise the root is left at the origin.
    """
    frames = frames or model.config.frames
    fps = fps or model.config.fps
    xr, ro = decode(model, z, frame_times(frames))
    if global_model is not None:
        from .globalmotion import predict_root_arrays, integrate_trajectory
        velocities, heights = predict_root_arrays(global_model, model.skeleton, xr, ro, fps)
        root_pos = integrate_trajectory(velocities, heights, fps,
                                        np.zeros(3) if origin is None else origin)
    else:
        root_pos = np.zeros((frames, 3))
    return MotionSequence.from_rotations(model.skeleton, fps, xr, ro, root_pos)


def sample_prior(model: GenerativeModel, n: int, frames: int | None = None,
                 fps: float | None = None, seed: int = 0, global_model=None) -> list:
    """Decode n standard-normal latent draws."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        z = LatentCode(rng.standard_normal(model.config.z_local),
                       rng.standard_normal(model.config.z_global))
        out.append(decode_motion(model, z, frames, fps, global_model))
    return out


def interpolate_latent(model: GenerativeModel, z_a: LatentCode, z_b: LatentCode,
                       steps: int, frames: int | None = None, fps: float | None = None,
                       global_model=None) -> list:
    """Decode a uniform linear blend from z_a to z_b (inclusive endpoints)."""
    if steps < 2:
        raise ValueError(f"need at least 2 steps, got {steps}")
    if z_a.z_local.shape != z_b.z_local.shape or z_a.z_global.shape != z_b.z_global.shape:
        raise ValueError("latent codes have mismatched dimensions")
    out = []
    for u in np.linspace(0.0, 1.0, steps):
        z = LatentCode((1 - u) * z_a.z_local + u * z_b.z_local,
                       (1 - u) * z_a.z_global + u * z_b.z_global)
        out.append(decode_motion(model, z, frames, fps, global_model))
    return out


def swap_latents(model: GenerativeModel, z_local_from: LatentCode,
                 z_global_from: LatentCode, frames: int | None = None,
                 fps: float | None = None, global_model=None) -> MotionSequence:
    """Local style of one code with the orientation behavior of another."""
    z = LatentCode(z_local_from.z_local, z_global_from.z_global)
    return decode_motion(model, z, frames, fps, global_model)
