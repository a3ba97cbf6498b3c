"""Layer building blocks: shared per-point affine maps, batch norm, ELU, pooling."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from ..errors import DimensionError
from . import tensor as T
from .rng import RngStream
from .tensor import Tensor, as_tensor

ELU_ALPHA = 1.0
BN_EPS = 1e-5
BN_MOMENTUM = 0.1


@dataclass
class BatchNormState:
    """Per-channel batch normalization over every axis but the last.

    In train mode the batch statistics normalize the input and are folded
    into the running estimates; eval mode only reads the running estimates.
    """

    gamma: Tensor
    beta: Tensor
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = BN_MOMENTUM
    epsilon: float = BN_EPS
    mode: str = "train"

    @classmethod
    def create(cls, channels: int, dtype=np.float64, name: str = "bn") -> "BatchNormState":
        return cls(
            gamma=Tensor(np.ones(channels), requires_grad=True, name=f"{name}.gamma", dtype=dtype),
            beta=Tensor(np.zeros(channels), requires_grad=True, name=f"{name}.beta", dtype=dtype),
            running_mean=np.zeros(channels, dtype=dtype),
            running_var=np.ones(channels, dtype=dtype),
        )

    @property
    def channels(self) -> int:
        return self.gamma.shape[0]


def batch_norm(x, state: BatchNormState) -> Tensor:
    x = as_tensor(x)
    c = state.channels
    if x.shape[-1] != c:
        raise DimensionError("x", f"batch norm expects {c} channels, got {x.shape[-1]}")
    v = x.values
    gamma, beta = state.gamma, state.beta
    if state.mode == "eval":
        scale = gamma.values / np.sqrt(state.running_var + state.epsilon)
        shift = beta.values - state.running_mean * scale
        out = v * scale + shift
        xhat = (v - state.running_mean) / np.sqrt(state.running_var + state.epsilon)

        def backward(g):
            red = tuple(range(g.ndim - 1))
            return g * scale, np.sum(g * xhat, axis=red), np.sum(g, axis=red)

        return T._node(out, (x, gamma, beta), backward)

    flat = v.reshape(-1, c)
    m = flat.shape[0]
    mu = flat.mean(axis=0)
    var = flat.var(axis=0)
    inv_std = 1.0 / np.sqrt(var + state.epsilon)
    xhat = (v - mu) * inv_std
    out = xhat * gamma.values + beta.values

    unbiased = var * m / (m - 1) if m > 1 else var
    mom = state.momentum
    state.running_mean = ((1 - mom) * state.running_mean + mom * mu).astype(state.running_mean.dtype)
    state.running_var = ((1 - mom) * state.running_var + mom * unbiased).astype(state.running_var.dtype)

    def backward(g):
        g2 = g.reshape(-1, c)
        xh = xhat.reshape(-1, c)
        dbeta = g2.sum(axis=0)
        dgamma = (g2 * xh).sum(axis=0)
        dxhat = g2 * gamma.values
        dx = inv_std / m * (m * dxhat - dxhat.sum(axis=0) - xh * (dxhat * xh).sum(axis=0))
        return dx.reshape(v.shape), dgamma, dbeta

    return T._node(out, (x, gamma, beta), backward)


def _affine(x, weights, bias, bn, activation, operand):
    x = as_tensor(x)
    weights = as_tensor(weights, dtype=x.dtype)
    if weights.values.ndim != 2:
        raise DimensionError("weights", f"expected c_in x c_out, got shape {weights.shape}")
    if x.values.ndim < 1 or x.shape[-1] != weights.shape[0]:
        raise DimensionError("weights", f"{operand} has {x.shape[-1:]} channels but weights expect {weights.shape[0]}")
    if not np.all(np.isfinite(x.values)):
        raise ValueError(f"{operand} contains non-finite values")
    y = T.matmul(x, weights)
    if bias is not None:
        bias = as_tensor(bias, dtype=x.dtype)
        if bias.shape != (weights.shape[1],):
            raise DimensionError("bias", f"expected ({weights.shape[1]},), got {bias.shape}")
        y = T.add(y, bias)
    if bn is not None:
        y = batch_norm(y, bn)
    if activation == "elu":
        y = T.elu(y, ELU_ALPHA)
    elif activation not in (None, "none"):
        raise ValueError(f"unknown activation {activation!r}")
    return y


def pointwise_conv(x, weights, bias=None, bn: BatchNormState | None = None, activation: str | None = "elu") -> Tensor:
    """Kernel-size-1 convolution: the same affine map applied to every point.

    ``x`` is ``(..., n, c_in)``; the result is ``(..., n, c_out)``.
    """
    return _affine(x, weights, bias, bn, activation, "x")


def linear(x, weights, bias=None, bn: BatchNormState | None = None, activation: str | None = "elu") -> Tensor:
    """Fully connected layer over a vector or a batch of row vectors."""
    return _affine(x, weights, bias, bn, activation, "x")


def max_pool_points(x) -> tuple[Tensor, np.ndarray]:
    """Column-wise maximum over the point axis (second to last)."""
    x = as_tensor(x)
    if x.values.ndim < 2:
        raise DimensionError("x", f"expected (..., n, c), got shape {x.shape}")
    return T.max_pool(x, axis=-2)


# ---------------------------------------------------------------- modules

class Module:
    """Container walking child modules/tensors in attribute order."""

    def children(self) -> Iterator[tuple[str, "Module"]]:
        for key, value in vars(self).items():
            if isinstance(value, Module):
                yield key, value
            elif isinstance(value, list):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield f"{key}{i}", item

    def parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for key, child in self.children():
            out.update(child.parameters(f"{prefix}{key}."))
        return out

    def buffers(self, prefix: str = "") -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for key, child in self.children():
            out.update(child.buffers(f"{prefix}{key}."))
        return out

    def set_buffer(self, name: str, value: np.ndarray) -> None:
        head, _, rest = name.partition(".")
        child = dict(self.children())[head]
        child.set_buffer(rest, value)

    def set_mode(self, mode: str) -> "Module":
        if mode not in ("train", "eval"):
            raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
        for _, child in self.children():
            child.set_mode(mode)
        return self

    def train(self) -> "Module":
        return self.set_mode("train")

    def eval(self) -> "Module":
        return self.set_mode("eval")

    def zero_grad(self) -> None:
        for p in self.parameters().values():
            p.zero_grad()

    def state_dict(self, prefix: str = "") -> dict[str, np.ndarray]:
        state = {name: p.values for name, p in self.parameters(prefix).items()}
        state.update(self.buffers(prefix))
        return state

    def load_state_dict(self, state: dict[str, np.ndarray], prefix: str = "") -> None:
        params = self.parameters(prefix)
        buffers = self.buffers(prefix)
        missing = (set(params) | set(buffers)) - set(state)
        if missing:
            raise KeyError(f"state is missing {sorted(missing)[:5]}")
        for name, p in params.items():
            if state[name].shape != p.shape:
                raise DimensionError(name, f"expected {p.shape}, got {state[name].shape}")
            p.values = np.array(state[name], dtype=p.dtype)
        for name, buf in buffers.items():
            self.set_buffer(name[len(prefix):], np.array(state[name], dtype=buf.dtype))


class Dense(Module):
    """Affine map + optional batch norm + optional ELU.

    Applied to the last axis, so it serves both as a 1x1 convolution over
    points and as a fully connected layer over a batch.
    """

    def __init__(self, c_in: int, c_out: int, rng: np.random.Generator, *, bn: bool = True,
                 activation: str | None = "elu", dtype=np.float64):
        bound = 1.0 / np.sqrt(c_in)
        self.weight = Tensor(rng.uniform(-bound, bound, size=(c_in, c_out)), requires_grad=True, dtype=dtype)
        self.bias = Tensor(rng.uniform(-bound, bound, size=c_out), requires_grad=True, dtype=dtype)
        self.bn = BatchNormState.create(c_out, dtype=dtype) if bn else None
        self.activation = activation

    @property
    def c_in(self) -> int:
        return self.weight.shape[0]

    @property
    def c_out(self) -> int:
        return self.weight.shape[1]

    def parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out = {f"{prefix}weight": self.weight, f"{prefix}bias": self.bias}
        if self.bn is not None:
            out[f"{prefix}gamma"] = self.bn.gamma
            out[f"{prefix}beta"] = self.bn.beta
        return out

    def buffers(self, prefix: str = "") -> dict[str, np.ndarray]:
        if self.bn is None:
            return {}
        return {f"{prefix}running_mean": self.bn.running_mean, f"{prefix}running_var": self.bn.running_var}

    def set_buffer(self, name: str, value: np.ndarray) -> None:
        if self.bn is None or name not in ("running_mean", "running_var"):
            raise KeyError(name)
        if np.any(value <= 0) and name == "running_var":
            raise ValueError("running_var must be strictly positive")
        setattr(self.bn, name, value)

    def set_mode(self, mode: str) -> "Dense":
        if self.bn is not None:
            self.bn.mode = mode
        return self

    def __call__(self, x) -> Tensor:
        return pointwise_conv(x, self.weight, self.bias, self.bn, self.activation)


class MLP(Module):
    """Stack of :class:`Dense` stages; the last may drop bn/activation."""

    def __init__(self, c_in: int, widths, rng: np.random.Generator, *, final_plain: bool = False,
                 dtype=np.float64, names=None):
        self.layers: list[Dense] = []
        names = names or [f"conv{i + 1}" for i in range(len(widths))]
        self._names = list(names)
        prev = c_in
        for i, width in enumerate(widths):
            last = i == len(widths) - 1
            plain = final_plain and last
            self.layers.append(Dense(prev, width, rng, bn=not plain,
                                     activation=None if plain else "elu", dtype=dtype))
            prev = width

    @property
    def c_out(self) -> int:
        return self.layers[-1].c_out

    def children(self):
        yield from zip(self._names, self.layers)

    def __call__(self, x) -> Tensor:
        for layer in self.layers:
            x = layer(x)
        return x


def init_rng(seed: int, tag: str) -> np.random.Generator:
    """Generator for parameter initialization of the component ``tag``."""
    return RngStream(seed, (f"init:{tag}", 0, 0)).generator()
