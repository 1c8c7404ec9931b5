"""Minibatch training loop with validation-plateau scheduling.

Epochs draw shuffled minibatches from the train split, optionally augment
the rasters, and apply Adam. Validation loss (eval mode, no augmentation)
drives the learning-rate schedule; training stops after two rate cuts or
``max_epochs``, returning the best-validation checkpoint.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, to_arrays
from .nn.optim import ParamStore, PlateauScheduler, adam_step
from .nn.tensor import Tape, backward
from .policy import LOSS_UNCERTAINTY, ModelConfig, batch_loss, init_policy_params

AUG_NOISE_SIGMA = 0.02
AUG_DROPOUT_P = 0.05
AUG_BRIGHTNESS = 0.1
AUG_CONTRAST = 0.1
MAX_LR_CUTS = 2


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)
    steer_log_var: list[float] = field(default_factory=list)
    accel_log_var: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_val_loss: float = float("inf")


def augment_rasters(rasters: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Observation augmentation: noise, cell dropout, brightness, contrast.

    Perturbation draws use float32 (twice the throughput, same determinism);
    the returned batch stays float64.
    """
    out = rasters + AUG_NOISE_SIGMA * rng.standard_normal(
        rasters.shape, dtype=np.float32)
    out *= rng.random(rasters.shape, dtype=np.float32) >= AUG_DROPOUT_P
    n = rasters.shape[0]
    bright = rng.uniform(-AUG_BRIGHTNESS, AUG_BRIGHTNESS, (n, 1, 1, 1))
    contrast = rng.uniform(1.0 - AUG_CONTRAST, 1.0 + AUG_CONTRAST, (n, 1, 1, 1))
    out -= 0.5
    out *= contrast
    out += 0.5 + bright
    np.clip(out, 0.0, 1.0, out=out)
    return out


def _batch_arrays(rasters_q: np.ndarray, idx: np.ndarray) -> np.ndarray:
    return rasters_q[idx].astype(np.float64) / 255.0


def _eval_loss(arrays, store: ParamStore, config: ModelConfig) -> float:
    rasters_q, speeds, lat, lon, targets = arrays
    n = rasters_q.shape[0]
    bs = config.batch_size
    total = 0.0
    for at in range(0, n, bs):
        idx = np.arange(at, min(at + bs, n))
        loss = batch_loss(_batch_arrays(rasters_q, idx), speeds[idx], lat[idx],
                          lon[idx], targets[idx], store, config, train=False,
                          rng=None, tape=None)
        total += loss.item() * idx.size
    return total / n


def train(dataset: Dataset, config: ModelConfig, seed: int,
          verbose: bool = False) -> tuple[ParamStore, TrainHistory]:
    """Fit a policy on a collected dataset; returns the best-validation
    parameters and the per-epoch history."""
    config.validate()
    if not dataset.trajectories:
        raise ValueError("cannot train on an empty dataset")
    train_arrays = to_arrays(dataset, ("train",))
    val_arrays = to_arrays(dataset, ("val",))
    return train_on_arrays(train_arrays, val_arrays, config, seed,
                           verbose=verbose)


def train_on_arrays(train_arrays, val_arrays, config: ModelConfig, seed: int,
                    verbose: bool = False) -> tuple[ParamStore, TrainHistory]:
    rasters_q, speeds, lat, lon, targets = train_arrays
    n = rasters_q.shape[0]
    if n == 0:
        raise ValueError("cannot train on an empty dataset")

    seq = np.random.SeedSequence(seed)
    rng_init, rng_shuffle, rng_drop, rng_aug = [
        np.random.default_rng(s) for s in seq.spawn(4)]
    store = init_policy_params(config, int(rng_init.integers(2 ** 31)))
    sched = PlateauScheduler(config.initial_lr)
    lr = config.initial_lr
    hist = TrainHistory()
    best_store = store.copy()

    for epoch in range(config.max_epochs):
        perm = rng_shuffle.permutation(n)
        epoch_loss = 0.0
        for at in range(0, n, config.batch_size):
            idx = perm[at:at + config.batch_size]
            x = _batch_arrays(rasters_q, idx)
            if config.augmentation:
                x = augment_rasters(x, rng_aug)
            tape = Tape()
            store.zero_grads()
            loss = batch_loss(x, speeds[idx], lat[idx], lon[idx], targets[idx],
                              store, config, train=True, rng=rng_drop,
                              tape=tape)
            backward(tape, loss)
            adam_step(store, store.collect_grads(), lr)
            epoch_loss += loss.item() * idx.size
        val = _eval_loss(val_arrays, store, config)
        hist.train_loss.append(epoch_loss / n)
        hist.val_loss.append(val)
        hist.lr.append(lr)
        if config.loss_mode == LOSS_UNCERTAINTY:
            hist.steer_log_var.append(store["steer_log_var"].item())
            hist.accel_log_var.append(store["accel_log_var"].item())
        if val < hist.best_val_loss:
            hist.best_val_loss = val
            hist.best_epoch = epoch
            best_store = store.copy()
        if verbose:
            print(f"epoch {epoch}: train {hist.train_loss[-1]:.5f} "
                  f"val {val:.5f} lr {lr:g}", file=sys.stderr)
        lr = sched.update(val)
        if sched.cuts >= MAX_LR_CUTS:
            break
    return best_store, hist


def history_to_dict(hist: TrainHistory) -> dict:
    return {
        "train_loss": hist.train_loss,
        "val_loss": hist.val_loss,
        "lr": hist.lr,
        "steer_log_var": hist.steer_log_var,
        "accel_log_var": hist.accel_log_var,
        "best_epoch": hist.best_epoch,
        "best_val_loss": hist.best_val_loss,
    }
