"""Minimal tensor substrate: reverse-mode autodiff, optimizers, checkpoints."""

from .checkpoint import CheckpointError, load_checkpoint, load_into, save_checkpoint
from .gradcheck import GradCheckReport, NonDeterministicError, ParamCheck, grad_check
from .ops import (
    add,
    concat_cols,
    concat_seq,
    constant,
    cross_entropy_lastdim,
    embedding_lookup,
    gelu,
    layer_norm_lastdim,
    matmul,
    mul_scalar,
    slice_cols,
    slice_seq,
    softmax_lastdim,
    tanh,
    transpose,
)
from .optim import adam_step, sgd_step
from .tensor import (
    NonFiniteError,
    Param,
    ShapeMismatchError,
    Tensor,
    default_dtype,
    mode,
    no_grad,
    set_mode,
)

__all__ = [
    "CheckpointError",
    "GradCheckReport",
    "NonDeterministicError",
    "NonFiniteError",
    "Param",
    "ParamCheck",
    "ShapeMismatchError",
    "Tensor",
    "add",
    "adam_step",
    "concat_cols",
    "concat_seq",
    "constant",
    "cross_entropy_lastdim",
    "default_dtype",
    "embedding_lookup",
    "gelu",
    "grad_check",
    "layer_norm_lastdim",
    "load_checkpoint",
    "load_into",
    "matmul",
    "mode",
    "mul_scalar",
    "no_grad",
    "save_checkpoint",
    "set_mode",
    "sgd_step",
    "slice_cols",
    "slice_seq",
    "softmax_lastdim",
    "tanh",
    "transpose",
]
