"""Small building blocks over the autodiff engine: MLPs and conv stacks.

Initialization is uniform fan-in scaling from a caller-provided seeded
generator, so models are reproducible bit-for-bit.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad

_ACTIVATIONS = {"tanh": ad.tanh, "relu": ad.relu}


def _init(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)


class MLP:
    """Fully connected stack; registers weights as {prefix}.w{i}/{prefix}.b{i}."""

    def __init__(self, store: ad.ParamStore, prefix: str, sizes, rng, activation="tanh"):
        self.activation = _ACTIVATIONS[activation]
        self.layers = []
        for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            w = store.add(f"{prefix}.w{i}", _init(rng, n_in, (n_in, n_out)))
            b = store.add(f"{prefix}.b{i}", _init(rng, n_in, (n_out,)))
            self.layers.append((w, b))

    def __call__(self, x: ad.Node) -> ad.Node:
        h = x
        last = len(self.layers) - 1
        for i, (w, b) in enumerate(self.layers):
            h = ad.matmul(h, w) + b
            if i != last:
                h = self.activation(h)
        return h


class ConvStack:
    """1-D conv stack over (channels, time); activation after every layer
    except the last when final_activation is False."""

    def __init__(self, store: ad.ParamStore, prefix: str, channels, rng,
                 kernel=4, stride=2, padding=1, dilations=None, activation="tanh",
                 final_activation=True):
        self.activation = _ACTIVATIONS[activation]
        self.stride = stride
        self.padding = padding
        self.kernel = kernel
        self.dilations = list(dilations) if dilations else [1] * (len(channels) - 1)
        self.final_activation = final_activation
        self.layers = []
        for i, (c_in, c_out) in enumerate(zip(channels[:-1], channels[1:])):
            w = store.add(f"{prefix}.w{i}", _init(rng, c_in * kernel, (c_out, c_in, kernel)))
            b = store.add(f"{prefix}.b{i}", _init(rng, c_in * kernel, (c_out,)))
            self.layers.append((w, b))

    def __call__(self, x: ad.Node) -> ad.Node:
        h = x
        last = len(self.layers) - 1
        for i, (w, b) in enumerate(self.layers):
            pad = self.padding if self.padding is not None else self.dilations[i]
            h = ad.conv1d(h, w, bias=b, stride=self.stride, padding=pad,
                          dilation=self.dilations[i])
            if i != last or self.final_activation:
                h = self.activation(h)
        return h

    def out_length(self, t: int) -> int:
        for i in range(len(self.layers)):
            pad = self.padding if self.padding is not None else self.dilations[i]
            k_eff = (self.kernel - 1) * self.dilations[i] + 1
            t = (t + 2 * pad - k_eff) // self.stride + 1
        return t


def cosine_lr(lr0: float, lr_end: float, epoch: int, epochs: int) -> float:
    """Cosine decay; the geodesic and L1 terms have sign-like gradients near
    their optima, so a decayed rate is what lets runs settle instead of
    dithering at a floor proportional to the step size."""
    if epochs <= 1:
        return lr0
    u = epoch / (epochs - 1)
    return lr_end + 0.5 * (lr0 - lr_end) * (1.0 + np.cos(np.pi * u))


def tile_rows(z: ad.Node, n: int) -> ad.Node:
    """Repeat a vector as n rows, differentiably: ones(n,1) @ z(1,d)."""
    d = z.value.size
    return ad.matmul(ad.constant(np.ones((n, 1))), ad.reshape(z, (1, d)))
