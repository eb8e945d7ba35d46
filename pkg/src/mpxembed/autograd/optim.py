"""AdamW with decoupled weight decay, plus gradient-norm utilities."""

from __future__ import annotations

import math

import numpy as np

from .. import backend
from .tensor import Tensor


class AdamW:
    """Fused AdamW over a named parameter dict.

    Weight decay is decoupled (applied to the parameter directly, never
    through the moment estimates). ``decay_filter`` decides which
    parameters receive decay; by default only matrices do, which keeps
    biases, norm gains, and single-token embeddings decay-free.
    """

    def __init__(self, params: dict[str, Tensor], betas=(0.9, 0.999), eps: float = 1e-8,
                 decay_filter=None):
        self.params = params
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.decay_filter = decay_filter or (lambda name, p: p.data.ndim >= 2)
        self._m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self._v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self, lr: float, weight_decay: float = 0.0) -> None:
        self.t += 1
        for name, p in self.params.items():
            if p.grad is None:
                continue
            if p.grad.shape != p.data.shape:
                raise ValueError(f"grad shape {p.grad.shape} != param shape {p.data.shape} for {name}")
            wd = weight_decay if self.decay_filter(name, p) else 0.0
            backend.adamw_update(p.data, p.grad, self._m[name], self._v[name],
                                 lr, self.beta1, self.beta2, self.eps, wd, self.t)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None


def adamw_step(param: np.ndarray, grad: np.ndarray, state: dict, lr: float,
               betas=(0.9, 0.999), weight_decay: float = 0.0, eps: float = 1e-8,
               t: int = 1) -> np.ndarray:
    """Single-array AdamW step; ``state`` holds the ``m``/``v`` moments.

    Stateless-friendly variant used by tests and small fitting loops.
    """
    if param.shape != grad.shape:
        raise ValueError(f"param shape {param.shape} != grad shape {grad.shape}")
    if t < 1:
        raise ValueError("step index t must be >= 1")
    if "m" not in state:
        state["m"] = np.zeros_like(param)
        state["v"] = np.zeros_like(param)
    out = param.copy()
    backend.adamw_update(out, grad, state["m"], state["v"], lr, betas[0], betas[1],
                         eps, weight_decay, t)
    return out


def global_grad_norm(params: dict[str, Tensor]) -> float:
    total = 0.0
    for p in params.values():
        if p.grad is not None:
            g = p.grad.astype(np.float64, copy=False)
            total += float(np.dot(g.reshape(-1), g.reshape(-1)))
    return math.sqrt(total)


def clip_grad_norm(params: dict[str, Tensor], max_norm: float) -> float:
    """Scale all gradients so the global L2 norm is at most ``max_norm``."""
    norm = global_grad_norm(params)
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for p in params.values():
            if p.grad is not None:
                p.grad *= scale
    return norm
