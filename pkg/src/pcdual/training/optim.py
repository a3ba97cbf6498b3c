"""Adam with L2 (or decoupled) weight decay and a step-decay schedule."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BETA1, BETA2, ADAM_EPS = 0.9, 0.999, 1e-8


@dataclass
class OptimizerState:
    base_lr: float = 1e-3
    weight_decay: float = 0.0
    decoupled: bool = False
    beta1: float = BETA1
    beta2: float = BETA2
    eps: float = ADAM_EPS
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def lr_at(epoch: int, base_lr: float = 1e-3, step: int = 10, gamma: float = 0.5) -> float:
    """Learning rate after halving (by default) every ``step`` epochs."""
    if epoch < 0:
        raise ValueError("epoch must be non-negative")
    return base_lr * gamma ** (epoch // step)


def adam_step(params: dict, grads: dict[str, np.ndarray], state: OptimizerState, lr: float) -> None:
    """Update ``params`` (name -> Tensor) in place from ``grads`` (name -> array).

    Coupled decay adds ``weight_decay * theta`` to the gradient before the
    moment updates; decoupled decay shrinks ``theta`` by ``lr * weight_decay``
    directly. Parameters without a gradient entry are treated as having a
    zero gradient.
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    step_size = lr / (1 - b1 ** t)
    bias2 = 1 - b2 ** t
    for name, p in params.items():
        theta = p.values
        g = grads.get(name)
        g = np.zeros_like(theta) if g is None else np.asarray(g, dtype=theta.dtype)
        if state.weight_decay and not state.decoupled:
            g = g + state.weight_decay * theta
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(theta)
            v = np.zeros_like(theta)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        state.m[name], state.v[name] = m, v
        update = step_size * m / (np.sqrt(v / bias2) + state.eps)
        if state.weight_decay and state.decoupled:
            theta = theta - lr * state.weight_decay * theta
        p.values = (theta - update).astype(theta.dtype)
