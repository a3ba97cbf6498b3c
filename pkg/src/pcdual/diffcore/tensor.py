"""Dense tensors with a recorded computation for reverse-mode gradients.

Every op takes :class:`Tensor` (or array-like) inputs and returns a new
``Tensor``. When any input requires a gradient the result remembers its
parents and a closure mapping the output gradient to input gradients;
:func:`backward` walks that record in reverse topological order.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import DimensionError

DEFAULT_DTYPE = np.float64


class Tensor:
    __slots__ = ("values", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, values, requires_grad: bool = False, name: str | None = None, dtype=None):
        if isinstance(values, Tensor):
            values = values.values
        if dtype is None:
            dtype = values.dtype if isinstance(values, np.ndarray) and values.dtype.kind == "f" else DEFAULT_DTYPE
        self.values = np.asarray(values, dtype=dtype)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def dtype(self):
        return self.values.dtype

    def zero_grad(self) -> None:
        self.grad = None

    def numpy(self) -> np.ndarray:
        return self.values

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

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

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    if dtype is None and isinstance(x, np.ndarray) and x.dtype.kind == "f":
        dtype = x.dtype
    return Tensor(x, dtype=dtype)


def _node(values: np.ndarray, parents: Sequence[Tensor], backward: Callable) -> Tensor:
    out = Tensor(values, dtype=values.dtype)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _pair(a, b) -> tuple[Tensor, Tensor]:
    if isinstance(a, Tensor):
        return a, as_tensor(b, dtype=a.dtype)
    if isinstance(b, Tensor):
        return as_tensor(a, dtype=b.dtype), b
    return as_tensor(a), as_tensor(b)


# ---------------------------------------------------------------- elementwise

def add(a, b) -> Tensor:
    a, b = _pair(a, b)
    return _node(a.values + b.values, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = _pair(a, b)
    return _node(a.values - b.values, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = _pair(a, b)
    return _node(a.values * b.values, (a, b),
                 lambda g: (_unbroadcast(g * b.values, a.shape), _unbroadcast(g * a.values, b.shape)))


def elu(x, alpha: float = 1.0) -> Tensor:
    x = as_tensor(x)
    v = x.values
    neg = np.expm1(np.minimum(v, 0.0))
    out = np.where(v > 0, v, alpha * neg)

    def backward(g):
        return (g * np.where(v > 0, 1.0, alpha * (neg + 1.0)).astype(v.dtype),)

    return _node(out, (x,), backward)


def log(x) -> Tensor:
    x = as_tensor(x)
    return _node(np.log(x.values), (x,), lambda g: (g / x.values,))


# ---------------------------------------------------------------- reductions

def sum(x, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    out = np.sum(x.values, axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _node(np.asarray(out), (x,), backward)


def mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    count = x.values.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / float(count))


def max_pool(x, axis: int = -2) -> tuple[Tensor, np.ndarray]:
    """Maximum along ``axis``; gradient goes to the first maximal entry."""
    x = as_tensor(x)
    axis = axis % x.values.ndim
    if x.shape[axis] == 0:
        raise DimensionError("x", "cannot max-pool over an empty point dimension")
    arg = np.argmax(x.values, axis=axis)
    idx = np.expand_dims(arg, axis)
    out = np.take_along_axis(x.values, idx, axis=axis).squeeze(axis)

    def backward(g):
        gx = np.zeros_like(x.values)
        np.put_along_axis(gx, idx, np.expand_dims(g, axis), axis=axis)
        return (gx,)

    return _node(out, (x,), backward), arg


# ---------------------------------------------------------------- linear algebra

def matmul(a, b) -> Tensor:
    """``a (..., k) @ b (k, m)``; ``b`` must be two-dimensional."""
    a, b = _pair(a, b)
    if b.values.ndim != 2:
        raise DimensionError("b", f"expected a 2-D right operand, got shape {b.shape}")
    if a.shape[-1] != b.shape[0]:
        raise DimensionError("b", f"inner extents differ: {a.shape} @ {b.shape}")
    out = a.values @ b.values

    def backward(g):
        ga = g @ b.values.T
        gb = a.values.reshape(-1, a.shape[-1]).T @ g.reshape(-1, b.shape[1])
        return ga, gb

    return _node(out, (a, b), backward)


def transpose(x) -> Tensor:
    x = as_tensor(x)
    return _node(x.values.T, (x,), lambda g: (g.T,))


def l2_normalize(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    norm = np.linalg.norm(x.values, axis=axis, keepdims=True)
    if np.any(norm == 0):
        raise ValueError("cannot normalize a zero-norm vector")
    u = x.values / norm

    def backward(g):
        return ((g - u * np.sum(g * u, axis=axis, keepdims=True)) / norm,)

    return _node(u, (x,), backward)


def log_softmax(x, exclude: np.ndarray | None = None) -> Tensor:
    """Log-softmax over the last axis, with ``exclude`` entries left out.

    Excluded entries receive ``-inf`` and no gradient.
    """
    x = as_tensor(x)
    v = x.values
    if exclude is not None:
        v = np.where(exclude, -np.inf, v)
    peak = np.max(v, axis=-1, keepdims=True)
    shifted = v - peak
    lse = np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))
    out = shifted - lse
    p = np.exp(out)

    def backward(g):
        if exclude is not None:
            g = np.where(exclude, 0.0, g)
        return (g - p * np.sum(g, axis=-1, keepdims=True),)

    return _node(out, (x,), backward)


# ---------------------------------------------------------------- shape ops

def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    return _node(x.values.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def broadcast_to(x, shape) -> Tensor:
    x = as_tensor(x)
    return _node(np.broadcast_to(x.values, shape).copy(), (x,), lambda g: (_unbroadcast(g, x.shape),))


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    dtype = next((t.dtype for t in tensors if isinstance(t, Tensor)), None)
    ts = [as_tensor(t, dtype=dtype) for t in tensors]
    axis = axis % ts[0].values.ndim
    out = np.concatenate([t.values for t in ts], axis=axis)
    bounds = np.cumsum([0] + [t.shape[axis] for t in ts])

    def backward(g):
        return tuple(np.take(g, np.arange(lo, hi), axis=axis) for lo, hi in zip(bounds[:-1], bounds[1:]))

    return _node(out, ts, backward)


def index(x, key) -> Tensor:
    """Basic or fancy indexing; repeated indices accumulate on the way back."""
    x = as_tensor(x)

    def backward(g):
        gx = np.zeros_like(x.values)
        np.add.at(gx, key, g)
        return (gx,)

    return _node(x.values[key], (x,), backward)


def gather(x, idx: np.ndarray) -> Tensor:
    """Batched row gather: ``x (B, n, c)``, ``idx (B, ...)`` -> ``(B, ..., c)``."""
    x = as_tensor(x)
    idx = np.asarray(idx)
    if idx.shape[0] != x.shape[0]:
        raise DimensionError("idx", f"batch extent {idx.shape[0]} != {x.shape[0]}")
    batch, n, c = x.shape
    flat = (idx + n * np.arange(batch).reshape((batch,) + (1,) * (idx.ndim - 1))).ravel()
    out = x.values.reshape(batch * n, c)[flat].reshape(idx.shape + (c,))

    def backward(g):
        g2 = g.reshape(-1, c)
        gx = np.empty((batch * n, c), dtype=g.dtype)
        for j in range(c):
            gx[:, j] = np.bincount(flat, weights=g2[:, j], minlength=batch * n)
        return (gx.reshape(x.shape),)

    return _node(out, (x,), backward)


# ---------------------------------------------------------------- backward

def _topological(root: Tensor) -> list[Tensor]:
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
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> dict[Tensor, np.ndarray]:
    """Accumulate d(loss)/d(leaf) into ``leaf.grad`` for every tracked leaf.

    Returns a map from each reached leaf to its (accumulated) gradient.
    Calling twice without :meth:`Tensor.zero_grad` adds the gradients.
    """
    if loss.values.size != 1:
        raise DimensionError("loss", f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return {}
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.values)}
    leaves: dict[Tensor, np.ndarray] = {}
    for node in reversed(_topological(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g.copy() if node.grad is None else node.grad + g
            leaves[node] = node.grad
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            pg = np.asarray(pg, dtype=parent.dtype)
            key = id(parent)
            grads[key] = pg if key not in grads else grads[key] + pg
    return leaves
