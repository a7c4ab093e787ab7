"""Dense-tensor computation core: autodiff ops, recurrent cells, seeded
initializers, the optimizer, gradient checking, and tensor serialization."""

from .gradcheck import finite_difference_check
from .init import orthogonal_init, uniform_init
from .optim import (
    Adam,
    AdamState,
    DEFAULT_CLIP_THRESHOLD,
    DEFAULT_LEARNING_RATE,
    adam_step,
    clip_gradients,
    global_norm,
)
from .recurrent import BiGru, GruWeights, bidirectional_gru, gru_cell, init_gru_weights
from .serialize import TensorFormatError, read_tensor, write_tensor
from .tensor import (
    DTYPE,
    Parameter,
    ShapeMismatchError,
    Tensor,
    add,
    concat,
    logsumexp,
    matmul,
    mean,
    mul,
    neg,
    no_grad,
    reshape,
    sigmoid,
    slice_cols,
    slice_rows,
    softmax,
    sub,
    take_rows,
    tanh,
    tensor_sum,
    zero_grads,
)

__all__ = [
    "Adam",
    "AdamState",
    "BiGru",
    "DEFAULT_CLIP_THRESHOLD",
    "DEFAULT_LEARNING_RATE",
    "DTYPE",
    "GruWeights",
    "Parameter",
    "ShapeMismatchError",
    "Tensor",
    "TensorFormatError",
    "add",
    "adam_step",
    "bidirectional_gru",
    "clip_gradients",
    "concat",
    "finite_difference_check",
    "global_norm",
    "gru_cell",
    "init_gru_weights",
    "logsumexp",
    "matmul",
    "mean",
    "mul",
    "neg",
    "no_grad",
    "orthogonal_init",
    "read_tensor",
    "reshape",
    "sigmoid",
    "slice_cols",
    "slice_rows",
    "softmax",
    "sub",
    "take_rows",
    "tanh",
    "tensor_sum",
    "uniform_init",
    "write_tensor",
    "zero_grads",
]
