"""Named parameter store, Adam, and the validation-plateau learning-rate rule."""

from __future__ import annotations

import copy

import numpy as np

from .tensor import Tensor

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

PLATEAU_PATIENCE = 5
PLATEAU_TOL = 1e-6
PLATEAU_FACTOR = 0.1


class ParamStore:
    """Ordered map name -> parameter Tensor plus per-parameter Adam moments."""

    def __init__(self):
        self.params: dict[str, Tensor] = {}
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.step_count = 0

    def add(self, name: str, data) -> Tensor:
        if name in self.params:
            raise ValueError(f"duplicate parameter {name!r}")
        t = Tensor(data)
        self.params[name] = t
        self.m[name] = np.zeros(t.data.shape)
        self.v[name] = np.zeros(t.data.shape)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def names(self) -> list[str]:
        return list(self.params)

    def zero_grads(self) -> None:
        for t in self.params.values():
            t.grad = None

    def collect_grads(self) -> dict[str, np.ndarray]:
        """Gradients after a backward pass; untouched parameters get zeros."""
        out = {}
        for name, t in self.params.items():
            out[name] = (np.zeros(t.data.shape) if t.grad is None
                         else np.array(t.grad, copy=True))
        return out

    def copy(self) -> "ParamStore":
        dup = ParamStore()
        for name, t in self.params.items():
            dup.add(name, np.array(t.data, copy=True))
            dup.m[name] = np.array(self.m[name], copy=True)
            dup.v[name] = np.array(self.v[name], copy=True)
        dup.step_count = self.step_count
        return dup

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data for name, t in self.params.items()}


def adam_step(store: ParamStore, grads: dict[str, np.ndarray],
              lr: float) -> ParamStore:
    """Bias-corrected Adam update, applied in place; returns the store."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise ValueError(f"non-finite gradient for parameter {name!r}")
    store.step_count += 1
    t = store.step_count
    bc1 = 1.0 - ADAM_BETA1 ** t
    bc2 = 1.0 - ADAM_BETA2 ** t
    for name, g in grads.items():
        p = store.params[name]
        m = store.m[name]
        v = store.v[name]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * (g * g)
        p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
    return store


def _first_best_index(history: list[float], tol: float) -> int:
    best = min(history)
    for i, x in enumerate(history):
        if x <= best + tol:
            return i
    return len(history) - 1


def lr_schedule(history: list[float], current_lr: float,
                patience: int = PLATEAU_PATIENCE, tol: float = PLATEAU_TOL,
                factor: float = PLATEAU_FACTOR) -> float:
    """Divide the rate by 10 once the best validation loss is stale.

    The best epoch anchors the staleness count; a cut is due when more than
    ``patience`` epochs (best epoch included) have passed without a strict
    improvement beyond ``tol``.
    """
    if not history:
        raise ValueError("lr_schedule needs a non-empty loss history")
    stale = len(history) - _first_best_index(history, tol)
    if stale > patience:
        return current_lr * factor
    return current_lr


class PlateauScheduler:
    """Stateful version of lr_schedule with the post-cut counter reset."""

    def __init__(self, lr: float, patience: int = PLATEAU_PATIENCE,
                 tol: float = PLATEAU_TOL, factor: float = PLATEAU_FACTOR):
        self.lr = lr
        self.patience = patience
        self.tol = tol
        self.factor = factor
        self.best = float("inf")
        self.anchor = 0
        self.epoch = 0
        self.cuts = 0

    def update(self, val_loss: float) -> float:
        """Record one epoch's validation loss; returns the rate to use next."""
        if val_loss < self.best - self.tol:
            self.best = val_loss
            self.anchor = self.epoch
        self.epoch += 1
        if self.epoch - self.anchor > self.patience:
            self.lr *= self.factor
            self.cuts += 1
            self.anchor = self.epoch  # counter resets after a cut
        return self.lr
