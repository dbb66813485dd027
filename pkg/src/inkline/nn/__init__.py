"""Minimal dense-tensor core with reverse-mode autodiff."""

from .functional import conv1d, conv_out_len, conv_transpose1d, lstm_step, scaled_dot_attention
from .optim import AdamState, Parameter, adam_step, uniform_fan_in, uniform_recurrent
from .tensor import (
    Tensor,
    abs_,
    add,
    as_tensor,
    concat,
    cross_entropy,
    exp,
    grad_enabled,
    l1_loss,
    log,
    logsumexp,
    matmul,
    mean,
    mse_loss,
    mul,
    no_grad,
    power,
    reshape,
    sigmoid,
    silu,
    softmax,
    softplus,
    sqrt,
    sum_,
    take,
    tanh,
    transpose,
)

__all__ = [
    "AdamState",
    "Parameter",
    "Tensor",
    "abs_",
    "adam_step",
    "add",
    "as_tensor",
    "concat",
    "conv1d",
    "conv_out_len",
    "conv_transpose1d",
    "cross_entropy",
    "exp",
    "grad_enabled",
    "l1_loss",
    "log",
    "logsumexp",
    "lstm_step",
    "matmul",
    "mean",
    "mse_loss",
    "mul",
    "no_grad",
    "power",
    "reshape",
    "scaled_dot_attention",
    "sigmoid",
    "silu",
    "softmax",
    "softplus",
    "sqrt",
    "sum_",
    "take",
    "tanh",
    "transpose",
    "uniform_fan_in",
    "uniform_recurrent",
]
