"""Reverse-mode automatic differentiation over dense float64 arrays.

Every computation builds a fresh graph of Node objects wrapping numpy
float64 arrays; backward() walks the graph once and accumulates gradients
into the leaves. Graphs are throwaway: rebuild per optimization step.

Broadcasting follows the leading-1 rule (shorter shapes are left-padded
with 1s, and a dimension of size 1 stretches); anything else raises
ShapeError. Gradients of broadcast operands are reduced back to the
operand's shape.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

ARCCOS_EPS = 1e-7


class AutodiffError(Exception):
    pass


class ShapeError(AutodiffError):
    """Operand shapes do not conform for a primitive."""

    def __init__(self, op: str, shape_a, shape_b):
        self.op = op
        self.shape_a = tuple(shape_a)
        self.shape_b = tuple(shape_b)
        super().__init__(f"{op}: incompatible shapes {self.shape_a} vs {self.shape_b}")


class GradientError(AutodiffError):
    pass


class NonFiniteGradientError(AutodiffError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"non-finite gradient for parameter {name!r}")


def as_array(x) -> np.ndarray:
    """Coerce to a C-contiguous float64 ndarray (0-d stays 0-d)."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim and not arr.flags["C_CONTIGUOUS"]:
        arr = np.ascontiguousarray(arr)
    return arr


class Node:
    """One value in the computation graph.

    value is a float64 ndarray; grad stays None until backward() reaches
    this node. requires_grad propagates from parents, so constant
    subgraphs are skipped entirely during backprop.
    """

    __slots__ = ("value", "grad", "parents", "op", "requires_grad", "_backward")

    def __init__(self, value, parents=(), op="leaf", backward=None, requires_grad=None):
        self.value = as_array(value)
        self.grad = None
        self.parents = tuple(parents)
        self.op = op
        if requires_grad is None:
            requires_grad = any(p.requires_grad for p in self.parents)
        self.requires_grad = requires_grad
        self._backward = backward

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Node(op={self.op!r}, shape={self.value.shape}, requires_grad={self.requires_grad})"

    # arithmetic sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return take(self, key)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def lift(x) -> Node:
    """Wrap a raw array/scalar as a constant Node; Nodes pass through."""
    if isinstance(x, Node):
        return x
    return Node(x, op="const", requires_grad=False)


def constant(x) -> Node:
    return Node(x, op="const", requires_grad=False)


def is_node(x) -> bool:
    return isinstance(x, Node)


def value_of(x) -> np.ndarray:
    return x.value if isinstance(x, Node) else as_array(x)


def backward(root: Node) -> None:
    """Accumulate d(root)/d(leaf) into .grad of every reachable leaf.

    root must hold a single scalar. Fan-out accumulates additively:
    a node feeding two consumers receives the sum of both path gradients.
    """
    if root.value.size != 1:
        raise GradientError(f"backward root must be scalar, got shape {root.value.shape}")
    # iterative postorder over the requires_grad subgraph
    topo: list[Node] = []
    seen: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    root.grad = np.ones_like(root.value)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def _accum(parent: Node, g) -> None:
    if not parent.requires_grad:
        return
    if parent.grad is None:
        parent.grad = np.zeros_like(parent.value)
    parent.grad += g


def _broadcast_check(op: str, sa, sb) -> tuple:
    try:
        return np.broadcast_shapes(sa, sb)
    except ValueError:
        raise ShapeError(op, sa, sb) from None


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a gradient of broadcast shape back to the operand shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# elementwise binary


def add(a, b) -> Node:
    a, b = lift(a), lift(b)
    _broadcast_check("add", a.value.shape, b.value.shape)

    def bwd(g):
        _accum(a, _unbroadcast(g, a.value.shape))
        _accum(b, _unbroadcast(g, b.value.shape))

    return Node(a.value + b.value, (a, b), "add", bwd)


def sub(a, b) -> Node:
    a, b = lift(a), lift(b)
    _broadcast_check("sub", a.value.shape, b.value.shape)

    def bwd(g):
        _accum(a, _unbroadcast(g, a.value.shape))
        _accum(b, _unbroadcast(-g, b.value.shape))

    return Node(a.value - b.value, (a, b), "sub", bwd)


def mul(a, b) -> Node:
    a, b = lift(a), lift(b)
    _broadcast_check("mul", a.value.shape, b.value.shape)

    def bwd(g):
        _accum(a, _unbroadcast(g * b.value, a.value.shape))
        _accum(b, _unbroadcast(g * a.value, b.value.shape))

    return Node(a.value * b.value, (a, b), "mul", bwd)


def div(a, b) -> Node:
    a, b = lift(a), lift(b)
    _broadcast_check("div", a.value.shape, b.value.shape)

    def bwd(g):
        _accum(a, _unbroadcast(g / b.value, a.value.shape))
        _accum(b, _unbroadcast(-g * a.value / (b.value * b.value), b.value.shape))

    return Node(a.value / b.value, (a, b), "div", bwd)


def maximum(a, b) -> Node:
    a, b = lift(a), lift(b)
    _broadcast_check("maximum", a.value.shape, b.value.shape)
    va, vb = a.value, b.value

    def bwd(g):
        # ties split the gradient evenly
        wa = np.where(va > vb, 1.0, np.where(va == vb, 0.5, 0.0))
        _accum(a, _unbroadcast(g * wa, va.shape))
        _accum(b, _unbroadcast(g * (1.0 - wa), vb.shape))

    return Node(np.maximum(va, vb), (a, b), "maximum", bwd)


def minimum(a, b) -> Node:
    a, b = lift(a), lift(b)
    _broadcast_check("minimum", a.value.shape, b.value.shape)
    va, vb = a.value, b.value

    def bwd(g):
        wa = np.where(va < vb, 1.0, np.where(va == vb, 0.5, 0.0))
        _accum(a, _unbroadcast(g * wa, va.shape))
        _accum(b, _unbroadcast(g * (1.0 - wa), vb.shape))

    return Node(np.minimum(va, vb), (a, b), "minimum", bwd)


# ---------------------------------------------------------------------------
# elementwise unary


def neg(x) -> Node:
    x = lift(x)

    def bwd(g):
        _accum(x, -g)

    return Node(-x.value, (x,), "neg", bwd)


def sin(x) -> Node:
    x = lift(x)

    def bwd(g):
        _accum(x, g * np.cos(x.value))

    return Node(np.sin(x.value), (x,), "sin", bwd)


def cos(x) -> Node:
    x = lift(x)

    def bwd(g):
        _accum(x, -g * np.sin(x.value))

    return Node(np.cos(x.value), (x,), "cos", bwd)


def arccos(x) -> Node:
    """arccos with inputs clamped to [-1+eps, 1-eps].

    The clamp keeps the gradient finite at the ends of the domain; inside
    the clamped region the derivative is exactly zero.
    """
    x = lift(x)
    lo, hi = -1.0 + ARCCOS_EPS, 1.0 - ARCCOS_EPS
    clipped = np.clip(x.value, lo, hi)
    interior = (x.value > lo) & (x.value < hi)

    def bwd(g):
        d = np.where(interior, -1.0 / np.sqrt(1.0 - clipped * clipped), 0.0)
        _accum(x, g * d)

    return Node(np.arccos(clipped), (x,), "arccos", bwd)


def exp(x) -> Node:
    x = lift(x)
    out_val = np.exp(x.value)

    def bwd(g):
        _accum(x, g * out_val)

    return Node(out_val, (x,), "exp", bwd)


def log(x) -> Node:
    x = lift(x)

    def bwd(g):
        _accum(x, g / x.value)

    return Node(np.log(x.value), (x,), "log", bwd)


def sqrt(x) -> Node:
    x = lift(x)
    out_val = np.sqrt(x.value)

    def bwd(g):
        _accum(x, g * 0.5 / out_val)

    return Node(out_val, (x,), "sqrt", bwd)


def tanh(x) -> Node:
    x = lift(x)
    out_val = np.tanh(x.value)

    def bwd(g):
        _accum(x, g * (1.0 - out_val * out_val))

    return Node(out_val, (x,), "tanh", bwd)


def relu(x) -> Node:
    x = lift(x)

    def bwd(g):
        _accum(x, g * (x.value > 0))

    return Node(np.maximum(x.value, 0.0), (x,), "relu", bwd)


def absolute(x) -> Node:
    x = lift(x)

    def bwd(g):
        _accum(x, g * np.sign(x.value))

    return Node(np.abs(x.value), (x,), "absolute", bwd)


# ---------------------------------------------------------------------------
# shape ops


def reshape(x, shape) -> Node:
    x = lift(x)
    shape = tuple(shape)
    old = x.value.shape

    def bwd(g):
        _accum(x, g.reshape(old))

    return Node(x.value.reshape(shape), (x,), "reshape", bwd)


def transpose(x, axes=None) -> Node:
    x = lift(x)
    if axes is None:
        axes = tuple(reversed(range(x.value.ndim)))
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))

    def bwd(g):
        _accum(x, g.transpose(inverse))

    return Node(x.value.transpose(axes), (x,), "transpose", bwd)


def take(x, key) -> Node:
    """Slicing/indexing; the backward scatters into a zero array.

    Advanced-index keys must not repeat positions (scatter would drop
    duplicates); all uses here are slices or unique index tuples.
    """
    x = lift(x)

    def bwd(g):
        gz = np.zeros_like(x.value)
        gz[key] += g
        _accum(x, gz)

    return Node(x.value[key], (x,), "slice", bwd)


def concat(nodes, axis=0) -> Node:
    nodes = [lift(n) for n in nodes]
    if not nodes:
        raise AutodiffError("concat of empty list")
    sizes = [n.value.shape[axis] for n in nodes]
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    def bwd(g):
        for n, lo, hi in zip(nodes, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(int(lo), int(hi))
            _accum(n, g[tuple(idx)])

    return Node(np.concatenate([n.value for n in nodes], axis=axis), tuple(nodes), "concat", bwd)


def stack(nodes, axis=0) -> Node:
    nodes = [lift(n) for n in nodes]

    def bwd(g):
        for i, n in enumerate(nodes):
            _accum(n, np.take(g, i, axis=axis))

    return Node(np.stack([n.value for n in nodes], axis=axis), tuple(nodes), "stack", bwd)


# ---------------------------------------------------------------------------
# reductions


def _expand_reduced(g, shape, axis, keepdims):
    if axis is None:
        return np.broadcast_to(g, shape)
    if not keepdims:
        axes = axis if isinstance(axis, tuple) else (axis,)
        for ax in sorted(a % len(shape) for a in axes):
            g = np.expand_dims(g, ax)
    return np.broadcast_to(g, shape)


def sum_(x, axis=None, keepdims=False) -> Node:
    x = lift(x)

    def bwd(g):
        _accum(x, _expand_reduced(g, x.value.shape, axis, keepdims))

    return Node(x.value.sum(axis=axis, keepdims=keepdims), (x,), "sum", bwd)


def mean(x, axis=None, keepdims=False) -> Node:
    x = lift(x)
    n = x.value.size if axis is None else np.prod(
        [x.value.shape[a] for a in (axis if isinstance(axis, tuple) else (axis,))]
    )

    def bwd(g):
        _accum(x, _expand_reduced(g, x.value.shape, axis, keepdims) / n)

    return Node(x.value.mean(axis=axis, keepdims=keepdims), (x,), "mean", bwd)


def cumsum(x, axis=0) -> Node:
    x = lift(x)

    def bwd(g):
        _accum(x, np.flip(np.cumsum(np.flip(g, axis=axis), axis=axis), axis=axis))

    return Node(np.cumsum(x.value, axis=axis), (x,), "cumsum", bwd)


def softmin(x, gamma, axis=None) -> Node:
    """Smoothed minimum: -gamma * log(sum(exp(-x / gamma))).

    Always <= min(x) and converges to it as gamma -> 0. Gradient is the
    softmin-weight distribution over the reduced entries.
    """
    if gamma <= 0:
        raise AutodiffError(f"softmin temperature must be positive, got {gamma}")
    x = lift(x)
    m = x.value.min(axis=axis, keepdims=True)
    z = np.exp(-(x.value - m) / gamma)
    s = z.sum(axis=axis, keepdims=True)
    out = m - gamma * np.log(s)
    if axis is not None:
        out = np.squeeze(out, axis=axis)
    elif out.ndim:
        out = out.reshape(())

    def bwd(g):
        w = z / s
        _accum(x, _expand_reduced(g, x.value.shape, axis, False) * w)

    return Node(out, (x,), "softmin", bwd)


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a, b) -> Node:
    a, b = lift(a), lift(b)
    va, vb = a.value, b.value
    if va.ndim < 2 or vb.ndim < 2 or va.shape[-1] != vb.shape[-2]:
        raise ShapeError("matmul", va.shape, vb.shape)
    _broadcast_check("matmul", va.shape[:-2], vb.shape[:-2])

    def bwd(g):
        ga = g @ np.swapaxes(vb, -1, -2)
        gb = np.swapaxes(va, -1, -2) @ g
        _accum(a, _unbroadcast(ga, va.shape))
        _accum(b, _unbroadcast(gb, vb.shape))

    return Node(va @ vb, (a, b), "matmul", bwd)


def conv1d(x, w, bias=None, stride=1, padding=0, dilation=1) -> Node:
    """Cross-correlation along the last axis.

    x is (C_in, T) or (T,); w is (C_out, C_in, K) or (K,). Output is
    (C_out, T_out) with T_out = (T + 2*padding - K_eff) // stride + 1,
    K_eff = (K-1)*dilation + 1. 1-D in, 1-D kernel gives 1-D out.
    """
    x, w = lift(x), lift(w)
    squeeze = x.value.ndim == 1 and w.value.ndim == 1
    vx = x.value[None, :] if x.value.ndim == 1 else x.value
    vw = w.value[None, None, :] if w.value.ndim == 1 else w.value
    if vx.ndim != 2 or vw.ndim != 3 or vx.shape[0] != vw.shape[1]:
        raise ShapeError("conv1d", x.value.shape, w.value.shape)
    c_in, t = vx.shape
    c_out, _, k = vw.shape
    k_eff = (k - 1) * dilation + 1
    t_out = (t + 2 * padding - k_eff) // stride + 1
    if t_out < 1:
        raise ShapeError("conv1d", x.value.shape, w.value.shape)
    xp = np.pad(vx, ((0, 0), (padding, padding)))
    cols = np.arange(t_out) * stride
    out = np.zeros((c_out, t_out))
    for i in range(k):
        out += vw[:, :, i] @ xp[:, cols + i * dilation]

    parents = [x, w]
    if bias is not None:
        bias = lift(bias)
        parents.append(bias)
        out = out + bias.value[:, None]

    def bwd(g):
        if squeeze:
            g = g[None, :]
        gxp = np.zeros_like(xp)
        gw = np.zeros_like(vw)
        for i in range(k):
            sel = cols + i * dilation
            gw[:, :, i] = g @ xp[:, sel].T
            np.add.at(gxp, (slice(None), sel), vw[:, :, i].T @ g)
        gx = gxp[:, padding:padding + t] if padding else gxp
        _accum(x, gx[0] if x.value.ndim == 1 else gx)
        _accum(w, gw[0, 0] if w.value.ndim == 1 else gw)
        if bias is not None:
            _accum(bias, g.sum(axis=1))

    return Node(out[0] if squeeze else out, tuple(parents), "conv1d", bwd)


# ---------------------------------------------------------------------------
# parameters and the optimizer


class ParamStore:
    """Named parameter nodes with stable, insertion-ordered iteration."""

    def __init__(self):
        self._params: dict[str, Node] = {}

    def add(self, name: str, value) -> Node:
        if name in self._params:
            raise AutodiffError(f"duplicate parameter name {name!r}")
        node = Node(value, op=f"param:{name}", requires_grad=True)
        self._params[name] = node
        return node

    def __getitem__(self, name: str) -> Node:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self):
        return list(self._params)

    def items(self):
        return self._params.items()

    def nodes(self):
        return list(self._params.values())

    def zero_grad(self) -> None:
        for node in self._params.values():
            node.grad = None

    def n_parameters(self) -> int:
        return sum(n.value.size for n in self._params.values())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.value.copy() for k, v in self._params.items()}

    def load_state_dict(self, state: dict) -> None:
        for name, node in self._params.items():
            if name not in state:
                raise AutodiffError(f"missing parameter {name!r} in state dict")
            arr = as_array(state[name])
            if arr.shape != node.value.shape:
                raise ShapeError(f"load:{name}", node.value.shape, arr.shape)
            node.value[...] = arr

    @contextmanager
    def frozen(self):
        """Temporarily mark all parameters constant so backward skips them."""
        for node in self._params.values():
            node.requires_grad = False
        try:
            yield self
        finally:
            for node in self._params.values():
                node.requires_grad = True


@dataclass
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0


def adam_step(params: ParamStore, grads: dict, config: AdamConfig, state: AdamState) -> None:
    """One bias-corrected Adam update, in place on the parameter values."""
    state.step += 1
    t = state.step
    for name, node in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(name)
        if name not in state.m:
            state.m[name] = np.zeros_like(node.value)
            state.v[name] = np.zeros_like(node.value)
        m, v = state.m[name], state.v[name]
        m *= config.beta1
        m += (1.0 - config.beta1) * g
        v *= config.beta2
        v += (1.0 - config.beta2) * g * g
        m_hat = m / (1.0 - config.beta1 ** t)
        v_hat = v / (1.0 - config.beta2 ** t)
        node.value -= config.lr * m_hat / (np.sqrt(v_hat) + config.eps)


class Adam:
    """Convenience wrapper binding AdamConfig + AdamState to a ParamStore."""

    def __init__(self, params: ParamStore, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.config = AdamConfig(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
        self.state = AdamState()

    def step(self, grads: dict | None = None) -> None:
        if grads is None:
            grads = {k: n.grad for k, n in self.params.items() if n.grad is not None}
        adam_step(self.params, grads, self.config, self.state)

    def zero_grad(self) -> None:
        self.params.zero_grad()
