"""Command-conditioned control policy and its training losses.

The model encodes the semantic raster and the ego speed separately,
concatenates both features, and routes them through command-selected MLP
branches:

  * multitask mode: four steering branches indexed by the lateral command
    and three acceleration branches indexed by the longitudinal command,
    each emitting one scalar;
  * single mode: one branch per lateral command emitting both scalars (the
    classic conditional-imitation baseline, blind to the longitudinal
    command).

An optional speed head regresses the current ego speed from the image
feature alone, encouraging the encoder to pick up scene dynamics.

Two loss families: a fixed-weight sum of the squared steering/acceleration
residuals, and an adaptive variant that learns per-task log variances. With
both log variances at zero the adaptive loss equals the fixed loss at
weights (0.5, 0.5).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .decision import CommandPair, LatCmd, LonCmd
from .nn.optim import ParamStore
from .nn.tensor import (Tape, Tensor, add, concat, conv3x3, dropout, flatten,
                        linear, mean_all, mul, relu, scalar_mul, slice_cols,
                        sub, sum_all, take_rows, tensor_abs, tensor_exp)
from .observe import GRID, N_CHANNELS, Observation

ENCODER_SMALL = "small"
ENCODER_DEEP = "deep"
MODE_MULTITASK = "multitask"
MODE_SINGLE = "single"
LOSS_UNCERTAINTY = "uncertainty"
LOSS_FIXED = "fixed"

IMG_FEAT = 128
MEAS_FEAT = 16
FEAT = IMG_FEAT + MEAS_FEAT
HEAD_WIDTH = 64
LAMBDA_SPEED = 0.05

N_LAT = 4
N_LON = 3

_SMALL_CHANNELS = (6, 12, 24)
_DEEP_CHANNELS = (12, 24, 48)


@dataclass
class ModelConfig:
    encoder: str = ENCODER_SMALL
    control_mode: str = MODE_MULTITASK
    loss_mode: str = LOSS_UNCERTAINTY
    w_steer: float = 0.5
    w_accel: float = 0.5
    speed_branch: bool = False
    augmentation: bool = True
    dropout_p: float = 0.5
    batch_size: int = 120
    initial_lr: float = 2e-4
    max_epochs: int = 100

    def validate(self) -> "ModelConfig":
        if self.encoder not in (ENCODER_SMALL, ENCODER_DEEP):
            raise ValueError(f"unknown encoder {self.encoder!r}")
        if self.control_mode not in (MODE_MULTITASK, MODE_SINGLE):
            raise ValueError(f"unknown control mode {self.control_mode!r}")
        if self.loss_mode not in (LOSS_UNCERTAINTY, LOSS_FIXED):
            raise ValueError(f"unknown loss mode {self.loss_mode!r}")
        if self.loss_mode == LOSS_UNCERTAINTY and self.control_mode != MODE_MULTITASK:
            raise ValueError("the adaptive loss requires multitask control")
        if self.w_steer < 0.0 or self.w_accel < 0.0:
            raise ValueError("loss weights must be non-negative")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d).validate()


_PRESETS = {
    # Single-branch baseline: both controls from one lat-indexed head.
    "single": dict(control_mode=MODE_SINGLE, loss_mode=LOSS_FIXED),
    # Single-branch baseline plus the speed-prediction head.
    "single_speed": dict(control_mode=MODE_SINGLE, loss_mode=LOSS_FIXED,
                         speed_branch=True),
    # Split lateral/longitudinal control, hand-tuned weights.
    "multitask_fixed": dict(control_mode=MODE_MULTITASK, loss_mode=LOSS_FIXED),
    # Split control with learned task weights (the full model).
    "multitask_adaptive": dict(control_mode=MODE_MULTITASK,
                               loss_mode=LOSS_UNCERTAINTY),
}


def preset(name: str, **overrides) -> ModelConfig:
    if name not in _PRESETS:
        raise ValueError(f"unknown preset {name!r}; options: {sorted(_PRESETS)}")
    kwargs = dict(_PRESETS[name])
    kwargs.update(overrides)
    return ModelConfig(**kwargs).validate()


@dataclass(frozen=True, slots=True)
class PredictedControls:
    steer: float
    accel: float
    speed_pred: float | None = None


def _he(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


def _add_mlp(store: ParamStore, rng, prefix: str, dims: list[int]) -> None:
    for i in range(len(dims) - 1):
        store.add(f"{prefix}.fc{i}.w", _he(rng, dims[i], (dims[i], dims[i + 1])))
        store.add(f"{prefix}.fc{i}.b", np.zeros(dims[i + 1]))


def init_policy_params(config: ModelConfig, seed: int) -> ParamStore:
    config.validate()
    rng = np.random.default_rng(seed)
    store = ParamStore()
    if config.encoder == ENCODER_SMALL:
        chans = (N_CHANNELS,) + _SMALL_CHANNELS
        for i in range(3):
            fan = chans[i] * 9
            store.add(f"img.conv{i}.w", _he(rng, fan, (chans[i + 1], chans[i], 3, 3)))
            store.add(f"img.conv{i}.b", np.zeros(chans[i + 1]))
        flat = _SMALL_CHANNELS[-1] * (GRID // 8) ** 2
    else:
        chans = (N_CHANNELS,) + _DEEP_CHANNELS
        for i in range(3):
            fan_a = chans[i] * 9
            fan_b = chans[i + 1] * 9
            store.add(f"img.conv{i}a.w", _he(rng, fan_a, (chans[i + 1], chans[i], 3, 3)))
            store.add(f"img.conv{i}a.b", np.zeros(chans[i + 1]))
            store.add(f"img.conv{i}b.w", _he(rng, fan_b, (chans[i + 1], chans[i + 1], 3, 3)))
            store.add(f"img.conv{i}b.b", np.zeros(chans[i + 1]))
        flat = _DEEP_CHANNELS[-1] * (GRID // 8) ** 2
    store.add("img.fc.w", _he(rng, flat, (flat, IMG_FEAT)))
    store.add("img.fc.b", np.zeros(IMG_FEAT))

    _add_mlp(store, rng, "meas", [1, MEAS_FEAT, MEAS_FEAT, MEAS_FEAT])

    if config.control_mode == MODE_MULTITASK:
        for k in range(N_LAT):
            _add_mlp(store, rng, f"steer{k}", [FEAT, HEAD_WIDTH, HEAD_WIDTH, 1])
        for k in range(N_LON):
            _add_mlp(store, rng, f"accel{k}", [FEAT, HEAD_WIDTH, HEAD_WIDTH, 1])
    else:
        for k in range(N_LAT):
            _add_mlp(store, rng, f"head{k}", [FEAT, HEAD_WIDTH, HEAD_WIDTH, 2])

    if config.speed_branch:
        _add_mlp(store, rng, "speed", [IMG_FEAT, HEAD_WIDTH, 1])

    if config.loss_mode == LOSS_UNCERTAINTY:
        store.add("steer_log_var", 0.0)
        store.add("accel_log_var", 0.0)
    return store


def _leaf(data) -> Tensor:
    """Input/target leaf; nothing reads its gradient."""
    return Tensor(data, constant=True)


def encode_batch(rasters: np.ndarray, speeds: np.ndarray, store: ParamStore,
                 config: ModelConfig, tape: Tape | None) -> tuple[Tensor, Tensor]:
    """Returns (full feature (B, 144), image feature (B, 128))."""
    x = _leaf(rasters)
    if config.encoder == ENCODER_SMALL:
        h = x
        for i in range(3):
            h = relu(conv3x3(h, store[f"img.conv{i}.w"], store[f"img.conv{i}.b"],
                             2, tape), tape)
    else:
        h = x
        for i in range(3):
            ha = relu(conv3x3(h, store[f"img.conv{i}a.w"],
                              store[f"img.conv{i}a.b"], 2, tape), tape)
            hb = conv3x3(ha, store[f"img.conv{i}b.w"], store[f"img.conv{i}b.b"],
                         1, tape)
            h = relu(add(hb, ha, tape), tape)
    img = relu(linear(flatten(h, tape), store["img.fc.w"], store["img.fc.b"],
                      tape), tape)

    m = _leaf(speeds.reshape(-1, 1))
    for i in range(3):
        m = relu(linear(m, store[f"meas.fc{i}.w"], store[f"meas.fc{i}.b"], tape),
                 tape)
    return concat([img, m], tape), img


def _head_forward(feat: Tensor, store: ParamStore, prefix: str, n_layers: int,
                  config: ModelConfig, train: bool,
                  rng: np.random.Generator | None, tape: Tape | None) -> Tensor:
    h = feat
    for i in range(n_layers - 1):
        h = relu(linear(h, store[f"{prefix}.fc{i}.w"], store[f"{prefix}.fc{i}.b"],
                        tape), tape)
        h = dropout(h, config.dropout_p, rng, train, tape)
    last = n_layers - 1
    return linear(h, store[f"{prefix}.fc{last}.w"], store[f"{prefix}.fc{last}.b"],
                  tape)


def forward_batch(rasters: np.ndarray, speeds: np.ndarray,
                  lat_cmds: np.ndarray, lon_cmds: np.ndarray,
                  store: ParamStore, config: ModelConfig, train: bool,
                  rng: np.random.Generator | None, tape: Tape | None):
    """Per-branch forward pass over a mixed-command batch.

    Returns (groups, speed_pred) where groups is a list of
    (indices, steer_pred, accel_pred) covering the batch, predictions as
    (n, 1) tensors, and speed_pred is a (B, 1) tensor or None.
    """
    feat, img = encode_batch(rasters, speeds, store, config, tape)
    groups = []
    if config.control_mode == MODE_MULTITASK:
        for k in range(N_LAT):
            idx = np.flatnonzero(lat_cmds == k)
            if idx.size == 0:
                continue
            sf = take_rows(feat, idx, tape)
            pred = _head_forward(sf, store, f"steer{k}", 3, config, train, rng, tape)
            groups.append(("steer", idx, pred))
        for k in range(N_LON):
            idx = np.flatnonzero(lon_cmds == k)
            if idx.size == 0:
                continue
            sf = take_rows(feat, idx, tape)
            pred = _head_forward(sf, store, f"accel{k}", 3, config, train, rng, tape)
            groups.append(("accel", idx, pred))
    else:
        for k in range(N_LAT):
            idx = np.flatnonzero(lat_cmds == k)
            if idx.size == 0:
                continue
            sf = take_rows(feat, idx, tape)
            both = _head_forward(sf, store, f"head{k}", 3, config, train, rng, tape)
            groups.append(("steer", idx, slice_cols(both, 0, 1, tape)))
            groups.append(("accel", idx, slice_cols(both, 1, 2, tape)))

    speed_pred = None
    if config.speed_branch:
        speed_pred = _head_forward(img, store, "speed", 2, config, train, rng, tape)
    return groups, speed_pred


def uncertainty_combine(ms_steer: Tensor, ms_accel: Tensor,
                        log_var_steer: Tensor, log_var_accel: Tensor,
                        tape: Tape | None) -> Tensor:
    """0.5 e^{-s1} ms1 + 0.5 e^{-s2} ms2 + 0.5 (s1 + s2)."""
    t1 = scalar_mul(mul(tensor_exp(scalar_mul(log_var_steer, -1.0, tape), tape),
                        ms_steer, tape), 0.5, tape)
    t2 = scalar_mul(mul(tensor_exp(scalar_mul(log_var_accel, -1.0, tape), tape),
                        ms_accel, tape), 0.5, tape)
    reg = scalar_mul(add(log_var_steer, log_var_accel, tape), 0.5, tape)
    return add(add(t1, t2, tape), reg, tape)


def fixed_combine(ms_steer: Tensor, ms_accel: Tensor, w_steer: float,
                  w_accel: float, tape: Tape | None) -> Tensor:
    return add(scalar_mul(ms_steer, w_steer, tape),
               scalar_mul(ms_accel, w_accel, tape), tape)


def _mean_sq(pred: Tensor, target: np.ndarray, tape: Tape | None) -> Tensor:
    r = sub(pred, _leaf(target.reshape(pred.shape)), tape)
    return mean_all(mul(r, r, tape), tape)


def uncertainty_loss(pred_steer: Tensor, pred_accel: Tensor,
                     target_steer: np.ndarray, target_accel: np.ndarray,
                     log_var_steer: Tensor, log_var_accel: Tensor,
                     tape: Tape | None, pred_speed: Tensor | None = None,
                     target_speed: np.ndarray | None = None,
                     lambda_speed: float = LAMBDA_SPEED) -> Tensor:
    """Adaptive multi-task loss over prediction tensors."""
    loss = uncertainty_combine(
        _mean_sq(pred_steer, np.asarray(target_steer, dtype=float), tape),
        _mean_sq(pred_accel, np.asarray(target_accel, dtype=float), tape),
        log_var_steer, log_var_accel, tape)
    if pred_speed is not None:
        loss = add(loss, _speed_l1(pred_speed, target_speed, lambda_speed, tape),
                   tape)
    return loss


def fixed_weight_loss(pred_steer: Tensor, pred_accel: Tensor,
                      target_steer: np.ndarray, target_accel: np.ndarray,
                      w_steer: float, w_accel: float, tape: Tape | None,
                      pred_speed: Tensor | None = None,
                      target_speed: np.ndarray | None = None,
                      lambda_speed: float = LAMBDA_SPEED) -> Tensor:
    loss = fixed_combine(
        _mean_sq(pred_steer, np.asarray(target_steer, dtype=float), tape),
        _mean_sq(pred_accel, np.asarray(target_accel, dtype=float), tape),
        w_steer, w_accel, tape)
    if pred_speed is not None:
        loss = add(loss, _speed_l1(pred_speed, target_speed, lambda_speed, tape),
                   tape)
    return loss


def _speed_l1(pred_speed: Tensor, target_speed: np.ndarray,
              lambda_speed: float, tape: Tape | None) -> Tensor:
    r = sub(pred_speed, _leaf(np.asarray(target_speed, dtype=float)
                              .reshape(pred_speed.shape)), tape)
    return scalar_mul(mean_all(tensor_abs(r, tape), tape), lambda_speed, tape)


def batch_loss(rasters: np.ndarray, speeds: np.ndarray, lat_cmds: np.ndarray,
               lon_cmds: np.ndarray, targets: np.ndarray, store: ParamStore,
               config: ModelConfig, train: bool,
               rng: np.random.Generator | None, tape: Tape | None) -> Tensor:
    """Full training loss for one mixed-command minibatch.

    ``targets`` is (B, 2) steering/acceleration labels; the speed head, when
    enabled, regresses the observed ego speed.
    """
    n = rasters.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    groups, speed_pred = forward_batch(
        rasters, speeds, lat_cmds, lon_cmds, store, config, train, rng, tape)

    sums = {"steer": None, "accel": None}
    col = {"steer": 0, "accel": 1}
    for kind, idx, pred in groups:
        tgt = _leaf(targets[idx, col[kind]].reshape(-1, 1))
        r = sub(pred, tgt, tape)
        s = sum_all(mul(r, r, tape), tape)
        sums[kind] = s if sums[kind] is None else add(sums[kind], s, tape)
    ms_steer = scalar_mul(sums["steer"], 1.0 / n, tape)
    ms_accel = scalar_mul(sums["accel"], 1.0 / n, tape)

    if config.loss_mode == LOSS_UNCERTAINTY:
        loss = uncertainty_combine(ms_steer, ms_accel, store["steer_log_var"],
                                   store["accel_log_var"], tape)
    else:
        loss = fixed_combine(ms_steer, ms_accel, config.w_steer, config.w_accel,
                             tape)
    if speed_pred is not None:
        loss = add(loss, _speed_l1(speed_pred, speeds, LAMBDA_SPEED, tape), tape)
    return loss


def encode(obs: Observation, store: ParamStore, config: ModelConfig,
           tape: Tape | None = None) -> Tensor:
    """Single-observation feature vector (1, 144)."""
    feat, _ = encode_batch(obs.raster[None], np.array([obs.ego_speed]), store,
                           config, tape)
    return feat


def predict(obs: Observation, cmds: CommandPair, store: ParamStore,
            config: ModelConfig, train: bool = False,
            rng: np.random.Generator | None = None,
            tape: Tape | None = None) -> PredictedControls:
    """Raw (unclipped) controls for one observation under one command pair."""
    if not (0 <= int(cmds.lat) < N_LAT and 0 <= int(cmds.lon) < N_LON):
        raise ValueError(f"invalid command encoding {cmds}")
    groups, speed_pred = forward_batch(
        obs.raster[None], np.array([obs.ego_speed]),
        np.array([int(cmds.lat)]), np.array([int(cmds.lon)]),
        store, config, train, rng, tape)
    steer = accel = None
    for kind, _idx, pred in groups:
        if kind == "steer":
            steer = float(pred.data[0, 0])
        else:
            accel = float(pred.data[0, 0])
    sp = float(speed_pred.data[0, 0]) if speed_pred is not None else None
    return PredictedControls(steer=steer, accel=accel, speed_pred=sp)


def act(obs: Observation, cmds: CommandPair, store: ParamStore,
        config: ModelConfig) -> tuple[float, float]:
    """Actuated action: raw predictions clipped to [-1, 1]."""
    p = predict(obs, cmds, store, config)
    return (min(1.0, max(-1.0, p.steer)), min(1.0, max(-1.0, p.accel)))
