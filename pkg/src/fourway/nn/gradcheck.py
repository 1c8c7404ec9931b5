"""Central-difference gradient verification."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .optim import ParamStore
from .tensor import Tape, Tensor, backward


def grad_check(f: Callable[[ParamStore, Tape | None], Tensor],
               store: ParamStore, h: float = 1e-4,
               max_coords_per_param: int | None = None,
               rng: np.random.Generator | None = None) -> float:
    """Compare analytic gradients with central differences.

    ``f(store, tape)`` must rebuild the same deterministic scalar loss on
    every call (dropout masks frozen by the caller). Returns the max over
    checked coordinates of |analytic - numeric| / max(1, |analytic|).

    With ``max_coords_per_param`` set, a seeded sample of coordinates is
    checked per parameter instead of every coordinate, which keeps the
    full-model check fast while still touching each tensor.
    """
    store.zero_grads()
    tape = Tape()
    loss = f(store, tape)
    backward(tape, loss)
    analytic = store.collect_grads()

    if rng is None:
        rng = np.random.default_rng(0)
    worst = 0.0
    for name, p in store.params.items():
        flat = p.data.reshape(-1)
        n = flat.size
        if max_coords_per_param is None or n <= max_coords_per_param:
            coords = range(n)
        else:
            coords = rng.choice(n, size=max_coords_per_param, replace=False)
        an_flat = analytic[name].reshape(-1)
        for i in coords:
            orig = flat[i]
            flat[i] = orig + h
            hi = f(store, None).item()
            flat[i] = orig - h
            lo = f(store, None).item()
            flat[i] = orig
            numeric = (hi - lo) / (2.0 * h)
            err = abs(an_flat[i] - numeric) / max(1.0, abs(an_flat[i]))
            if err > worst:
                worst = float(err)
    return worst
