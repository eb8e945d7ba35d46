"""Pretraining configuration and schedules."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass


@dataclass
class PretrainConfig:
    # view construction
    global_crops: int = 2
    global_scale: tuple[float, float] = (0.48, 1.0)
    local_crops: int = 8
    local_scale: tuple[float, float] = (0.16, 0.48)
    patch_size: int = 64
    patch_stride: int = 64
    # masking
    mask_ratio: tuple[float, float] = (0.1, 0.5)
    # projection head
    prototypes: int = 1024
    head_hidden: int = 512
    head_bottleneck: int = 64
    # temperatures
    student_temp: float = 0.1
    teacher_temp_start: float = 0.04
    teacher_temp_final: float = 0.07
    teacher_temp_warmup_epochs: int = 30
    # teacher EMA
    teacher_momentum_start: float = 0.992
    teacher_momentum_final: float = 1.0
    # optimizer
    lr_post_warmup: float = 0.004
    lr_final: float = 1e-6
    warmup_epochs: int = 10
    weight_decay_start: float = 0.04
    weight_decay_final: float = 0.4
    adamw_betas: tuple[float, float] = (0.9, 0.999)
    grad_clip: float = 3.0
    freeze_last_layer_epochs: int = 1
    # loop
    batch_size: int = 8
    total_steps: int = 5000
    steps_per_epoch: int = 50
    center_momentum: float = 0.9
    seed: int = 0

    def __post_init__(self):
        for lo, hi in (self.global_scale, self.local_scale):
            if not (0 < lo <= hi <= 1):
                raise ValueError(f"crop scales must lie in (0, 1], got ({lo}, {hi})")
        lo, hi = self.mask_ratio
        if not (0 <= lo <= hi <= 1):
            raise ValueError(f"mask ratio range must lie in [0, 1], got ({lo}, {hi})")
        for v in (self.lr_post_warmup, self.lr_final, self.teacher_temp_start,
                  self.teacher_temp_final, self.weight_decay_start, self.weight_decay_final):
            if not math.isfinite(v):
                raise ValueError("schedule endpoints must be finite")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PretrainConfig":
        d = dict(d)
        for key in ("global_scale", "local_scale", "mask_ratio", "adamw_betas"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    @property
    def warmup_steps(self) -> int:
        return self.warmup_epochs * self.steps_per_epoch

    @property
    def teacher_temp_warmup_steps(self) -> int:
        return self.teacher_temp_warmup_epochs * self.steps_per_epoch

    @property
    def freeze_last_layer_steps(self) -> int:
        return self.freeze_last_layer_epochs * self.steps_per_epoch


def desk_pretrain_config(**overrides) -> PretrainConfig:
    """Workstation-scale profile: small batch, 5k steps, fewer local crops."""
    base = dict(local_crops=4, batch_size=8, total_steps=5000, steps_per_epoch=50)
    base.update(overrides)
    return PretrainConfig(**base)


def _cosine(start: float, final: float, frac: float) -> float:
    return final + 0.5 * (start - final) * (1.0 + math.cos(math.pi * frac))


def schedule_value(kind: str, t: int, cfg: PretrainConfig) -> float:
    """Scheduled value at step ``t`` in [0, total_steps].

    lr: linear warmup from 0 to the post-warmup value, then cosine to the
    final value. teacher_temp: linear warmup then constant. weight_decay
    and teacher_momentum: cosine between their endpoints.
    """
    total = cfg.total_steps
    if not 0 <= t <= total:
        raise ValueError(f"step {t} outside [0, {total}]")
    if kind == "lr":
        w = cfg.warmup_steps
        if t <= w and w > 0:
            return cfg.lr_post_warmup * t / w
        span = max(total - w, 1)
        return _cosine(cfg.lr_post_warmup, cfg.lr_final, (t - w) / span)
    if kind == "teacher_temp":
        w = cfg.teacher_temp_warmup_steps
        if w > 0 and t < w:
            return cfg.teacher_temp_start + (cfg.teacher_temp_final - cfg.teacher_temp_start) * t / w
        return cfg.teacher_temp_final
    if kind == "teacher_momentum":
        return _cosine(cfg.teacher_momentum_start, cfg.teacher_momentum_final, t / total)
    if kind == "weight_decay":
        return _cosine(cfg.weight_decay_start, cfg.weight_decay_final, t / total)
    raise ValueError(f"unknown schedule {kind!r}")
