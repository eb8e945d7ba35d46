"""Multi-crop view construction for student-teacher training.

Crops are taken at native resolution (marker pixels are physical
measurements, so nothing is resized): a scale draw fixes the crop side,
snapped down to a token-stride multiple so every view tokenizes cleanly.
All views of one patch share the same three selected channels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data.patching import augment_view


@dataclass
class View:
    pixels: np.ndarray          # (3, side, side), normalized
    is_global: bool
    slot: int                   # view slot index (globals first, then locals)


def snap_side(patch_size: int, scale: float, stride: int, token_size: int) -> int:
    """Crop side for an area-scale draw, floored to a stride multiple."""
    side = int(np.floor(np.sqrt(scale) * patch_size / stride)) * stride
    return max(side, token_size)


def draw_sides(patch_size: int, cfg, stride: int, token_size: int,
               rng: np.random.Generator) -> tuple[list[int], int]:
    """Per-step crop sides: one per global slot, one shared by all locals."""
    g = [snap_side(patch_size, rng.uniform(*cfg.global_scale), stride, token_size)
         for _ in range(cfg.global_crops)]
    local = snap_side(patch_size, rng.uniform(*cfg.local_scale), stride, token_size)
    return g, local


def build_views(patch3: np.ndarray, cfg, rng: np.random.Generator,
                global_sides: list[int] | None = None,
                local_side: int | None = None, *, stride: int = 8,
                token_size: int = 8) -> list[View]:
    """Global + local augmented views of one 3-channel patch."""
    if global_sides is None or local_side is None:
        global_sides, local_side = draw_sides(patch3.shape[-1], cfg, stride, token_size, rng)
    views = []
    for slot, side in enumerate(global_sides):
        views.append(View(pixels=augment_view(patch3, side, rng), is_global=True, slot=slot))
    for k in range(cfg.local_crops):
        views.append(View(pixels=augment_view(patch3, local_side, rng),
                          is_global=False, slot=cfg.global_crops + k))
    return views
