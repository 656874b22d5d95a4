"""Dense tensors with reverse-mode autodiff, Adam, and checkpoints."""
from . import tensor as ops
from .checkpoint import CheckpointError, load_params, read_arrays, save_params, write_arrays
from .params import ParamStore, adam_step, grad
from .tensor import Tensor, get_dtype, no_grad, precision, set_debug

__all__ = [
    "CheckpointError",
    "ParamStore",
    "Tensor",
    "adam_step",
    "get_dtype",
    "grad",
    "load_params",
    "no_grad",
    "ops",
    "precision",
    "read_arrays",
    "save_params",
    "set_debug",
    "write_arrays",
]
