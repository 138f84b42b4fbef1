"""Reverse-mode autodiff over dense float64 numpy arrays.

A Tensor wraps an ndarray plus a gradient slot. Operations record a backward
closure and their parent tensors; :func:`backward` replays the closures in
reverse topological order from a scalar loss. Gradients on leaf tensors
(parameters) accumulate across backward calls until the caller zeros them;
gradients on interior nodes are reset at the start of every backward pass.

Everything is float64 so that the finite-difference checker
(:func:`grad_check`) is a meaningful oracle for every op built on top.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

Array = np.ndarray


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(
        self,
        data,
        parents: tuple["Tensor", ...] = (),
        backward: Callable[[Array], None] | None = None,
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Array | None = None
        self._parents = parents
        self._backward = backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, data={self.data!r})"

    # arithmetic sugar; scalars and arrays are treated as constants
    def __add__(self, other):
        return add(self, other) if isinstance(other, Tensor) else add_const(self, other)

    def __radd__(self, other):
        return add_const(self, other)

    def __sub__(self, other):
        return sub(self, other) if isinstance(other, Tensor) else add_const(self, -np.asarray(other))

    def __mul__(self, other):
        return mul(self, other) if isinstance(other, Tensor) else mul_const(self, other)

    def __rmul__(self, other):
        return mul_const(self, other)

    def __neg__(self):
        return mul_const(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)


def _accum(t: Tensor, g: Array) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: Array, shape: tuple[int, ...]) -> Array:
    """Sum a gradient down to ``shape`` after numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_finite(data: Array, op: str) -> Array:
    if not np.all(np.isfinite(data)):
        raise FloatingPointError(f"non-finite values produced by {op}")
    return data


# ---------------------------------------------------------------------------
# Elementwise and structural ops
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data, (a, b))

    def bw(g: Array) -> None:
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(g, b.shape))

    out._backward = bw
    return out


def add_const(a: Tensor, c) -> Tensor:
    out = Tensor(a.data + np.asarray(c, dtype=np.float64), (a,))
    out._backward = lambda g: _accum(a, _unbroadcast(g, a.shape))
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data - b.data, (a, b))

    def bw(g: Array) -> None:
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(-g, b.shape))

    out._backward = bw
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data * b.data, (a, b))

    def bw(g: Array) -> None:
        _accum(a, _unbroadcast(g * b.data, a.shape))
        _accum(b, _unbroadcast(g * a.data, b.shape))

    out._backward = bw
    return out


def mul_const(a: Tensor, c) -> Tensor:
    c = np.asarray(c, dtype=np.float64)
    out = Tensor(a.data * c, (a,))
    out._backward = lambda g: _accum(a, _unbroadcast(g * c, a.shape))
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape[-1] != b.data.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out = Tensor(a.data @ b.data, (a, b))

    def bw(g: Array) -> None:
        if a.ndim == 2 and b.ndim == 2:
            _accum(a, g @ b.data.T)
            _accum(b, a.data.T @ g)
        elif a.ndim == 1 and b.ndim == 2:
            _accum(a, g @ b.data.T)
            _accum(b, np.outer(a.data, g))
        elif a.ndim == 2 and b.ndim == 1:
            _accum(a, np.outer(g, b.data))
            _accum(b, a.data.T @ g)
        else:  # 1D @ 1D inner product
            _accum(a, g * b.data)
            _accum(b, g * a.data)

    out._backward = bw
    return out


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    out = Tensor(y, (x,))
    out._backward = lambda g: _accum(x, g * (1.0 - y * y))
    return out


def sigmoid(x: Tensor) -> Tensor:
    y = _sigmoid_nd(x.data)
    out = Tensor(y, (x,))
    out._backward = lambda g: _accum(x, g * y * (1.0 - y))
    return out


def _sigmoid_nd(z: Array) -> Array:
    # overflow-safe logistic: exp only ever sees non-positive arguments
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    out = Tensor(np.where(mask, x.data, 0.0), (x,))
    out._backward = lambda g: _accum(x, g * mask)
    return out


def exp(x: Tensor) -> Tensor:
    y = np.exp(x.data)
    out = Tensor(_check_finite(y, "exp"), (x,))
    out._backward = lambda g: _accum(x, g * y)
    return out


def log(x: Tensor) -> Tensor:
    if np.any(x.data <= 0):
        raise FloatingPointError("log of a non-positive value")
    out = Tensor(np.log(x.data), (x,))
    out._backward = lambda g: _accum(x, g / x.data)
    return out


def tsum(x: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    out = Tensor(x.data.sum(axis=axis, keepdims=keepdims), (x,))

    def bw(g: Array) -> None:
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accum(x, np.broadcast_to(g, x.shape).copy())

    out._backward = bw
    return out


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = tuple(parts)
    out = Tensor(np.concatenate([p.data for p in parts], axis=axis), parts)
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def bw(g: Array) -> None:
        for p, lo, hi in zip(parts, offsets, offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            _accum(p, g[tuple(sl)])

    out._backward = bw
    return out


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = Tensor(x.data.reshape(shape), (x,))
    out._backward = lambda g: _accum(x, g.reshape(x.shape))
    return out


def getitem(x: Tensor, idx) -> Tensor:
    """Basic (non-duplicating) indexing: ints, slices, and tuples thereof."""
    out = Tensor(x.data[idx], (x,))

    def bw(g: Array) -> None:
        if x.grad is None:
            x.grad = np.zeros_like(x.data)
        x.grad[idx] += g

    out._backward = bw
    return out


def take_rows(x: Tensor, indices: Sequence[int]) -> Tensor:
    """Gather rows of a 2D tensor; duplicate indices accumulate correctly."""
    idx = np.asarray(indices, dtype=np.intp)
    out = Tensor(x.data[idx], (x,))

    def bw(g: Array) -> None:
        if x.grad is None:
            x.grad = np.zeros_like(x.data)
        np.add.at(x.grad, idx, g)

    out._backward = bw
    return out


def logsumexp(x: Tensor, axis: int | None = None) -> Tensor:
    """log(sum(exp(x))) along ``axis``, max-shifted for stability.

    The shift is a constant, so gradients reduce to the softmax of x.
    """
    if axis is not None and axis < 0:
        axis += x.ndim
    m = x.data.max(axis=axis, keepdims=True)
    shifted = exp(add_const(x, -m))
    summed = tsum(shifted, axis=axis, keepdims=True)
    out = add_const(log(summed), m)
    if axis is not None:
        out = reshape(out, tuple(n for i, n in enumerate(out.shape) if i != axis))
    else:
        out = reshape(out, ())
    return out


# ---------------------------------------------------------------------------
# Backward pass and the finite-difference oracle
# ---------------------------------------------------------------------------

def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """Populate gradients of every tensor reachable from a scalar loss.

    Interior gradients are recomputed from scratch; leaf gradients accumulate
    across calls (callers zero parameter grads once per optimization step).
    """
    if loss.data.shape != ():
        raise ValueError(f"backward requires a scalar loss, got shape {loss.shape}")
    order = _topo_order(loss)
    for node in order:
        if node._parents:
            node.grad = None
    _accum(loss, np.ones((), dtype=np.float64))
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def grad_check(
    loss_fn: Callable[[], Tensor],
    params: Iterable[Tensor],
    epsilon: float = 1e-5,
) -> float:
    """Max relative error between autodiff and central finite differences.

    ``loss_fn`` must be deterministic (dropout off or a fixed rng). The
    relative error is |g_ad - g_fd| / max(1, |g_ad|, |g_fd|) over every
    parameter entry.
    """
    params = list(params)
    for p in params:
        p.grad = None
    backward(loss_fn())
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    worst = 0.0
    for p, ga in zip(params, analytic):
        flat = p.data.reshape(-1)
        gflat = ga.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            hi = float(loss_fn().data)
            flat[i] = orig - epsilon
            lo = float(loss_fn().data)
            flat[i] = orig
            fd = (hi - lo) / (2.0 * epsilon)
            err = abs(gflat[i] - fd) / max(1.0, abs(gflat[i]), abs(fd))
            worst = max(worst, err)
    return worst
