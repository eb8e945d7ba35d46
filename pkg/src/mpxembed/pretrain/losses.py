"""Self-distillation and masked-prediction objectives.

Both losses are cross-entropies between student predictions and sharpened,
centered teacher distributions over a shared set of prototypes. Collapse
is prevented by centering the teacher logits with an EMA of their batch
mean (no optimal-transport normalization at this scale).
"""

from __future__ import annotations

import numpy as np

from ..autograd import tensor as ag
from ..autograd.tensor import Tensor


class ProjectionHead:
    """3-layer MLP to an L2-normalized bottleneck, then unit-norm prototypes.

    Logits are cosine similarities between the bottleneck vector and the
    prototype rows, giving the temperatures a fixed O(1) scale to act on.
    Shared between the CLS (distillation) and token (masked prediction)
    paths.
    """

    def __init__(self, params: dict[str, Tensor]):
        self.params = params

    @classmethod
    def init(cls, dim: int, hidden: int, bottleneck: int, prototypes: int,
             rng: np.random.Generator, dtype=np.float32) -> "ProjectionHead":
        def w(din, dout, std=0.02):
            return Tensor(rng.normal(0.0, std, (din, dout)).astype(dtype),
                          requires_grad=True, dtype=dtype)

        def zeros(dout):
            return Tensor(np.zeros(dout, dtype=dtype), requires_grad=True, dtype=dtype)

        return cls({
            "head.w1": w(dim, hidden), "head.b1": zeros(hidden),
            "head.w2": w(hidden, hidden), "head.b2": zeros(hidden),
            "head.w3": w(hidden, bottleneck), "head.b3": zeros(bottleneck),
            "head.proto": w(prototypes, bottleneck, std=1.0),
        })

    def forward(self, x: Tensor) -> Tensor:
        p = self.params
        h = ag.gelu(ag.add(ag.matmul(x, p["head.w1"]), p["head.b1"]))
        h = ag.gelu(ag.add(ag.matmul(h, p["head.w2"]), p["head.b2"]))
        z = ag.add(ag.matmul(h, p["head.w3"]), p["head.b3"])
        zn = ag.l2_normalize(z)
        proto = ag.transpose(ag.l2_normalize(p["head.proto"]), (1, 0))
        return ag.matmul(zn, proto)


def _log_softmax(x: np.ndarray) -> np.ndarray:
    m = x.max(axis=-1, keepdims=True)
    return x - m - np.log(np.exp(x - m).sum(axis=-1, keepdims=True))


class CenteredDistillationLoss:
    """Cross-entropy of student views against centered teacher targets.

    ``student_logits`` holds one (rows, K) tensor per view, globals first;
    ``teacher_logits`` holds one constant (rows, K) array per global view.
    Pairs where teacher and student saw the identical crop are excluded.
    The center tracks teacher logit means with an EMA.
    """

    def __init__(self, prototypes: int, center_momentum: float = 0.9):
        self.center = np.zeros(prototypes, dtype=np.float64)
        self.center_momentum = center_momentum

    def __call__(self, student_logits: list[Tensor], teacher_logits: list[np.ndarray],
                 student_temp: float, teacher_temp: float,
                 update_center: bool = True) -> Tensor:
        if student_temp <= 0 or teacher_temp <= 0:
            raise ValueError(f"temperatures must be positive, got {student_temp}, {teacher_temp}")
        targets = [
            _log_softmax((t.astype(np.float64) - self.center) / teacher_temp)
            for t in teacher_logits
        ]
        terms = []
        for i, log_t in enumerate(targets):
            for j, s in enumerate(student_logits):
                if j == i:
                    continue
                scaled = ag.mul(s, 1.0 / student_temp)
                terms.append(ag.cross_entropy_log_targets(scaled, log_t.astype(s.dtype)))
        if not terms:
            raise ValueError("no teacher/student view pairs to distill")
        total = terms[0]
        for t in terms[1:]:
            total = ag.add(total, t)
        if update_center:
            batch = np.concatenate([t.astype(np.float64) for t in teacher_logits])
            self.center = (self.center_momentum * self.center
                           + (1 - self.center_momentum) * batch.mean(axis=0))
        return ag.mul(total, 1.0 / len(terms))


class MaskedTokenLoss:
    """Cross-entropy on masked student tokens against the teacher's tokens.

    Only masked locations contribute (all markers at each masked
    location); the loss is the mean over masked token instances and is
    exactly zero with an empty mask.
    """

    def __init__(self, prototypes: int, center_momentum: float = 0.9):
        self.center = np.zeros(prototypes, dtype=np.float64)
        self.center_momentum = center_momentum

    def __call__(self, student_logits: Tensor | None, teacher_logits: np.ndarray | None,
                 student_temp: float, teacher_temp: float,
                 update_center: bool = True) -> Tensor:
        if student_logits is None or student_logits.shape[0] == 0:
            return Tensor(0.0)
        if student_temp <= 0 or teacher_temp <= 0:
            raise ValueError(f"temperatures must be positive, got {student_temp}, {teacher_temp}")
        if teacher_logits.shape != student_logits.shape:
            raise ValueError(f"teacher tokens {teacher_logits.shape} != student {student_logits.shape}")
        log_t = _log_softmax((teacher_logits.astype(np.float64) - self.center) / teacher_temp)
        scaled = ag.mul(student_logits, 1.0 / student_temp)
        loss = ag.cross_entropy_log_targets(scaled, log_t.astype(student_logits.dtype))
        if update_center:
            self.center = (self.center_momentum * self.center
                           + (1 - self.center_momentum) * teacher_logits.astype(np.float64).mean(axis=0))
        return loss


def ema_update(teacher: dict[str, np.ndarray], student: dict[str, Tensor],
               momentum: float) -> None:
    """teacher <- momentum * teacher + (1 - momentum) * student, per parameter."""
    if not 0.0 <= momentum <= 1.0:
        raise ValueError(f"momentum must lie in [0, 1], got {momentum}")
    from .. import backend

    for name, s in student.items():
        t = teacher[name]
        if t.shape != s.data.shape:
            raise ValueError(f"{name}: teacher shape {t.shape} != student shape {s.data.shape}")
        backend.ema_update(t, s.data, momentum)
