"""Tensor arithmetic with reverse-mode gradients, optimizers, and checks."""

from .engine import (
    ShapeError,
    Tensor,
    add,
    as_tensor,
    backward,
    concat,
    constant,
    cross_entropy_masked,
    dropout,
    embedding_gather,
    layer_norm,
    matmul,
    mul,
    relu,
    reshape,
    sigmoid,
    softmax,
    stack,
    take,
    tanh,
    tmean,
    transpose,
    tsum,
    zero_grad,
)
from .gradcheck import GradCheckEntry, GradCheckReport, grad_check
from .optim import (
    AdamW,
    ConstantSchedule,
    OptimizerError,
    ScheduleError,
    SgdMomentum,
    WarmupSchedule,
    warmup_lr,
)

__all__ = [
    "AdamW",
    "ConstantSchedule",
    "GradCheckEntry",
    "GradCheckReport",
    "OptimizerError",
    "ScheduleError",
    "SgdMomentum",
    "ShapeError",
    "Tensor",
    "WarmupSchedule",
    "add",
    "as_tensor",
    "backward",
    "concat",
    "constant",
    "cross_entropy_masked",
    "dropout",
    "embedding_gather",
    "grad_check",
    "layer_norm",
    "matmul",
    "mul",
    "relu",
    "reshape",
    "sigmoid",
    "softmax",
    "stack",
    "take",
    "tanh",
    "tmean",
    "transpose",
    "tsum",
    "warmup_lr",
    "zero_grad",
]
