from .tensor import (
    ShapeError,
    Tensor,
    add,
    concat,
    cross_entropy_log_targets,
    embedding,
    gelu,
    get_default_dtype,
    layer_norm,
    matmul,
    mean,
    mul,
    no_grad,
    reshape,
    set_debug_checks,
    set_default_dtype,
    slice_,
    softmax,
    sum_,
    transpose,
    unfold_tokens,
    using_dtype,
)
from .optim import AdamW, adamw_step, clip_grad_norm, global_grad_norm

__all__ = [
    "AdamW", "ShapeError", "Tensor", "add", "adamw_step", "clip_grad_norm",
    "concat", "cross_entropy_log_targets", "embedding", "gelu",
    "get_default_dtype", "global_grad_norm", "layer_norm", "matmul", "mean",
    "mul", "no_grad", "reshape", "set_debug_checks", "set_default_dtype",
    "slice_", "softmax", "sum_", "transpose", "unfold_tokens", "using_dtype",
]
