"""Differentiable soft dynamic time warping.

The smoothed DP recurrence is r(i,j) = cost(i,j) + softmin_gamma over the
three predecessor cells; its exact gradient with respect to the cost
matrix follows from the reverse recursion over softmin weights, installed
here as a single autodiff primitive on top of a differentiable
squared-Euclidean cost matrix. Both passes run along anti-diagonals so
the DP stays vectorized.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad


class DtwError(ValueError):
    pass


def _check_series(a: np.ndarray, b: np.ndarray) -> None:
    if a.ndim != 2 or b.ndim != 2:
        raise DtwError(f"series must be 2-D (frames, features), got {a.shape} and {b.shape}")
    if a.shape[0] < 1 or b.shape[0] < 1:
        raise DtwError("series must be non-empty")
    if a.shape[1] != b.shape[1]:
        raise DtwError(f"feature dims differ: {a.shape[1]} vs {b.shape[1]}")


def _soft_dtw_forward(cost: np.ndarray, gamma: float) -> np.ndarray:
    ta, tb = cost.shape
    r = np.full((ta + 1, tb + 1), np.inf)
    r[0, 0] = 0.0
    for d in range(2, ta + tb + 1):
        i = np.arange(max(1, d - tb), min(ta, d - 1) + 1)
        if i.size == 0:
            continue
        j = d - i
        r1 = r[i - 1, j - 1]
        r2 = r[i - 1, j]
        r3 = r[i, j - 1]
        m = np.minimum(np.minimum(r1, r2), r3)
        soft = m - gamma * np.log(np.exp(-(r1 - m) / gamma)
                                  + np.exp(-(r2 - m) / gamma)
                                  + np.exp(-(r3 - m) / gamma))
        r[i, j] = cost[i - 1, j - 1] + soft
    return r


def _soft_dtw_grad(cost: np.ndarray, r: np.ndarray, gamma: float) -> np.ndarray:
    """dR[ta,tb]/dcost via the reverse softmin-weight recursion."""
    ta, tb = cost.shape
    rp = np.full((ta + 2, tb + 2), -np.inf)
    rp[1:ta + 1, 1:tb + 1] = r[1:, 1:]
    rp[0, 0] = 0.0
    rp[ta + 1, tb + 1] = r[ta, tb]
    cp = np.zeros((ta + 2, tb + 2))
    cp[1:ta + 1, 1:tb + 1] = cost
    e = np.zeros((ta + 2, tb + 2))
    e[ta + 1, tb + 1] = 1.0
    for d in range(ta + tb, 1, -1):
        i = np.arange(max(1, d - tb), min(ta, d - 1) + 1)
        if i.size == 0:
            continue
        j = d - i
        with np.errstate(invalid="ignore"):
            wa = np.exp((rp[i + 1, j] - rp[i, j] - cp[i + 1, j]) / gamma)
            wb = np.exp((rp[i, j + 1] - rp[i, j] - cp[i, j + 1]) / gamma)
            wc = np.exp((rp[i + 1, j + 1] - rp[i, j] - cp[i + 1, j + 1]) / gamma)
        wa = np.nan_to_num(wa, nan=0.0, posinf=0.0)
        wb = np.nan_to_num(wb, nan=0.0, posinf=0.0)
        wc = np.nan_to_num(wc, nan=0.0, posinf=0.0)
        e[i, j] = wa * e[i + 1, j] + wb * e[i, j + 1] + wc * e[i + 1, j + 1]
    return e[1:ta + 1, 1:tb + 1]


def soft_dtw_from_cost(cost, gamma: float) -> ad.Node:
    """Soft-DTW value of a (Ta, Tb) cost matrix, differentiable in the costs."""
    if gamma <= 0:
        raise DtwError(f"gamma must be positive, got {gamma}")
    cost = ad.lift(cost)
    r = _soft_dtw_forward(cost.value, gamma)
    value = r[-1, -1]

    def bwd(g):
        ad._accum(cost, g * _soft_dtw_grad(cost.value, r, gamma))

    return ad.Node(np.asarray(value), (cost,), "soft_dtw", bwd)


def pairwise_sqdist(a, b) -> ad.Node:
    """Differentiable (Ta, Tb) matrix of squared Euclidean distances."""
    a, b = ad.lift(a), ad.lift(b)
    ta, _ = a.value.shape
    tb, _ = b.value.shape
    an = ad.reshape(ad.sum_(a * a, axis=1), (ta, 1))
    bn = ad.reshape(ad.sum_(b * b, axis=1), (1, tb))
    return an + bn - 2.0 * ad.matmul(a, ad.transpose(b, (1, 0)))


def soft_dtw(a, b, gamma: float):
    """Soft-DTW between (Ta, D) and (Tb, D) series with squared-Euclidean
    ground cost. Type-preserving: Node inputs give a Node back."""
    graph = isinstance(a, ad.Node) or isinstance(b, ad.Node)
    an, bn = ad.lift(a), ad.lift(b)
    _check_series(an.value, bn.value)
    out = soft_dtw_from_cost(pairwise_sqdist(an, bn), gamma)
    return out if graph else out.value.item()


def hard_dtw(a, b) -> float:
    """Classic min-cost DTW with the same squared-Euclidean ground cost."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_series(a, b)
    cost = (np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :]
            - 2.0 * a @ b.T)
    ta, tb = cost.shape
    r = np.full((ta + 1, tb + 1), np.inf)
    r[0, 0] = 0.0
    for i in range(1, ta + 1):
        for j in range(1, tb + 1):
            r[i, j] = cost[i - 1, j - 1] + min(r[i - 1, j - 1], r[i - 1, j], r[i, j - 1])
    return float(r[ta, tb])
