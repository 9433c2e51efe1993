# Tensor kernel with reverse-mode differentiation
from numerics.tensor import Tensor, concat, matmul, no_grad, set_debug, stack
from numerics.ops import (
    conv2d,
    cross_entropy,
    linear,
    log_softmax,
    lstm_cell,
    max_pool2d,
    sincos_table,
    softmax,
)
from numerics.params import Initializer, ParamSet
from numerics.rng import SplitMix64, derive_seed
from numerics.gradcheck import grad_check

__all__ = [
    "Tensor", "concat", "matmul", "no_grad", "set_debug", "stack",
    "conv2d", "cross_entropy", "linear", "log_softmax", "lstm_cell", "max_pool2d",
    "sincos_table", "softmax", "Initializer", "ParamSet", "SplitMix64", "derive_seed",
    "grad_check",
]
