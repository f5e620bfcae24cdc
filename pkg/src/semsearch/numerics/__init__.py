"""Minimal dense tensor library with tape-based reverse-mode autodiff and Adam."""

from . import ops
from .gradcheck import gradient_check, numerical_gradient, relative_error
from .optim import Adam, AdamState, adam_step
from .tensor import (
    Tape,
    Tensor,
    as_tensor,
    current_tape,
    get_dtype,
    get_precision,
    no_tape,
    parameter,
    precision,
    set_precision,
)

__all__ = [
    "Adam",
    "AdamState",
    "Tape",
    "Tensor",
    "adam_step",
    "as_tensor",
    "current_tape",
    "get_dtype",
    "get_precision",
    "gradient_check",
    "no_tape",
    "numerical_gradient",
    "ops",
    "parameter",
    "precision",
    "relative_error",
    "set_precision",
]
