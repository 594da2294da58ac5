"""Shared test utilities: finite-difference gradient oracle."""

from __future__ import annotations

import numpy as np


def central_difference(f, xs, step=1e-5):
    """Central finite-difference gradients of scalar f w.r.t. each array in xs.

    f receives the list of arrays and returns a float. Arrays are perturbed
    in place and restored, one element at a time.
    """
    grads = []
    for x in xs:
        g = np.zeros_like(x)
        flat = x.reshape(-1)
        gf = g.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + step
            fp = f(xs)
            flat[j] = orig - step
            fm = f(xs)
            flat[j] = orig
            gf[j] = (fp - fm) / (2.0 * step)
        grads.append(g)
    return grads


def rel_error(analytic, numeric):
    """Max-norm relative error between two gradient arrays."""
    diff = np.max(np.abs(analytic - numeric))
    scale = max(np.max(np.abs(numeric)), np.max(np.abs(analytic)), 1e-8)
    return diff / scale
