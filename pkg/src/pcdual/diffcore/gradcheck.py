"""Central-difference gradient checking."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, backward


def grad_check(f: Callable[[], Tensor], params: Sequence[Tensor], step: float = 1e-5,
               max_coords: int | None = None, rng: np.random.Generator | None = None) -> float:
    """Max over coordinates of ``|analytic - numeric| / max(1, |numeric|)``.

    ``f`` recomputes a scalar loss from the current values of ``params``.
    With ``max_coords`` only that many coordinates per parameter (chosen by
    ``rng``) are perturbed, which keeps wide layers affordable.
    """
    for p in params:
        p.zero_grad()
    loss = f()
    if not np.all(np.isfinite(loss.values)):
        raise ValueError("f returned a non-finite value")
    backward(loss)
    analytic = [np.zeros_like(p.values) if p.grad is None else p.grad.copy() for p in params]
    rng = rng or np.random.default_rng(0)

    worst = 0.0
    for p, grad in zip(params, analytic):
        flat = p.values.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = rng.choice(flat.size, size=max_coords, replace=False)
        for i in coords:
            orig = flat[i]
            flat[i] = orig + step
            up = float(f().values)
            flat[i] = orig - step
            down = float(f().values)
            flat[i] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise ValueError("f returned a non-finite value")
            numeric = (up - down) / (2 * step)
            err = abs(grad.reshape(-1)[i] - numeric) / max(1.0, abs(numeric))
            worst = max(worst, err)
    for p in params:
        p.zero_grad()
    return worst
