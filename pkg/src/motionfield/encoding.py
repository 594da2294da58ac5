"""Sinusoidal positional encoding of the normalized time coordinate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad


@dataclass
class PositionalEncodingConfig:
    octaves: int = 7          # frequencies 2^0 .. 2^(octaves-1), times pi
    include_raw_t: bool = True

    def __post_init__(self):
        if not 1 <= self.octaves <= 21:
            raise ValueError(f"octaves must be in [1, 21], got {self.octaves}")

    @property
    def dim(self) -> int:
        return 2 * self.octaves + (1 if self.include_raw_t else 0)

    def to_dict(self) -> dict:
        return {"octaves": self.octaves, "include_raw_t": self.include_raw_t}

    @classmethod
    def from_dict(cls, d: dict) -> "PositionalEncodingConfig":
        return cls(octaves=int(d["octaves"]), include_raw_t=bool(d["include_raw_t"]))


def encode_time(t, config: PositionalEncodingConfig):
    """(sin(2^0 pi t), cos(2^0 pi t), ..., sin(2^(L-1) pi t), cos(...) [, t]).

    t is a batch of normalized times (N,); returns (N, config.dim).
    Type-preserving: Node in, Node out.
    """
    graph = isinstance(t, ad.Node)
    tn = ad.lift(t)
    if tn.value.ndim != 1:
        tn = ad.reshape(tn, (tn.value.size,))
    n = tn.value.shape[0]
    cols = []
    for k in range(config.octaves):
        scaled = tn * (2.0 ** k * np.pi)
        cols.append(ad.reshape(ad.sin(scaled), (n, 1)))
        cols.append(ad.reshape(ad.cos(scaled), (n, 1)))
    if config.include_raw_t:
        cols.append(ad.reshape(tn, (n, 1)))
    out = ad.concat(cols, axis=1)
    return out if graph else out.value


def frame_times(n_frames: int) -> np.ndarray:
    """Normalized times for integer frames: frame i -> -1 + 2 i / (T - 1)."""
    if n_frames < 2:
        raise ValueError(f"need at least 2 frames, got {n_frames}")
    return -1.0 + 2.0 * np.arange(n_frames) / (n_frames - 1)
