"""Minimal reverse-mode autodiff engine used by the transmitter, the channel
chain, and the neural receiver."""

from .conv import conv2d, conv2d_separable, depthwise_conv2d
from .diffarray import (
    DiffArray,
    DomainError,
    ShapeError,
    add,
    array_sum,
    as_diff,
    backward,
    bce_bits,
    cabs2,
    cconj,
    cmatmul,
    cmul,
    constant,
    delay,
    div_scalar,
    exp,
    gather_rows,
    leaf,
    log,
    mean,
    mean_axis0,
    mul,
    neg,
    place_rows,
    pointwise_mix,
    relu,
    reshape,
    scale,
    softplus,
    square,
    sub,
    sum_axis0,
    transpose,
    zero_grads,
)
from .io import ContainerFormatError, load_arrays, load_complex, save_arrays, save_complex
from .optim import AdamState, NonFiniteGradientError, SgdState, adam_step, sgd_step

__all__ = [
    "AdamState",
    "ContainerFormatError",
    "DiffArray",
    "DomainError",
    "NonFiniteGradientError",
    "SgdState",
    "ShapeError",
    "adam_step",
    "add",
    "array_sum",
    "as_diff",
    "backward",
    "bce_bits",
    "cabs2",
    "cconj",
    "cmatmul",
    "cmul",
    "constant",
    "conv2d",
    "conv2d_separable",
    "delay",
    "depthwise_conv2d",
    "div_scalar",
    "exp",
    "gather_rows",
    "leaf",
    "load_arrays",
    "load_complex",
    "log",
    "mean",
    "mean_axis0",
    "mul",
    "neg",
    "place_rows",
    "pointwise_mix",
    "relu",
    "reshape",
    "save_arrays",
    "save_complex",
    "scale",
    "sgd_step",
    "softplus",
    "square",
    "sub",
    "sum_axis0",
    "transpose",
    "zero_grads",
]
