from .tensor import (Tape, Tensor, add, concat, conv3x3, dropout, flatten,
                     linear, mean_all, mul, relu, scalar_mul, slice_cols,
                     sub, sum_all, take_rows, tensor_abs, tensor_exp, backward)
from .optim import ParamStore, PlateauScheduler, adam_step, lr_schedule
from .gradcheck import grad_check
from .checkpoint import load_params, save_params

__all__ = [
    "Tape", "Tensor", "add", "concat", "conv3x3", "dropout", "flatten",
    "linear", "mean_all", "mul", "relu", "scalar_mul", "slice_cols", "sub",
    "sum_all", "take_rows", "tensor_abs", "tensor_exp", "backward",
    "ParamStore", "PlateauScheduler", "adam_step", "lr_schedule",
    "grad_check", "load_params", "save_params",
]
