"""Minimal dense-tensor numerics: taped gradients, Adam, seeded streams."""

from .params import ParamEntry, ParamStore, adam_step, init_uniform_fanin, init_zeros
from .rng import (
    STREAM_EVAL,
    STREAM_INIT,
    STREAM_PROBE,
    STREAM_SAMPLER,
    RngStream,
)
from .tensor import (
    DimensionError,
    GruParams,
    NumericError,
    Tensor,
    abs_,
    add,
    affine,
    as_tensor,
    backward,
    elu,
    gather_last,
    grad_enabled,
    gru_cell,
    gru_sequence,
    linear,
    matmul,
    mean_,
    mul,
    neg,
    no_grad,
    relu,
    reshape,
    sigmoid,
    split0,
    stack0,
    sub,
    sum_,
    sum_axis,
    tanh,
    transpose,
    where_mask,
)

__all__ = [
    "DimensionError",
    "GruParams",
    "NumericError",
    "ParamEntry",
    "ParamStore",
    "RngStream",
    "STREAM_EVAL",
    "STREAM_INIT",
    "STREAM_PROBE",
    "STREAM_SAMPLER",
    "Tensor",
    "abs_",
    "add",
    "adam_step",
    "affine",
    "as_tensor",
    "backward",
    "elu",
    "gather_last",
    "grad_enabled",
    "gru_cell",
    "gru_sequence",
    "init_uniform_fanin",
    "init_zeros",
    "linear",
    "matmul",
    "mean_",
    "mul",
    "neg",
    "no_grad",
    "relu",
    "reshape",
    "sigmoid",
    "split0",
    "stack0",
    "sub",
    "sum_",
    "sum_axis",
    "tanh",
    "transpose",
    "where_mask",
]
