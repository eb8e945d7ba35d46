"""Block masking over token locations for the masked-prediction objective."""

from __future__ import annotations

import math

import numpy as np


def block_mask(grid_h: int, grid_w: int, ratio_range: tuple[float, float],
               rng: np.random.Generator) -> np.ndarray:
    """Boolean (grid_h * grid_w,) mask of contiguous token rectangles.

    The masked fraction is drawn uniformly from ``ratio_range`` and hit
    exactly: overshoot from the last rectangle is trimmed in row-major
    order, undershoot is topped up the same way.
    """
    n = grid_h * grid_w
    lo, hi = ratio_range
    t_min = math.ceil(lo * n)
    t_max = math.floor(hi * n)
    if t_max < t_min:
        t_max = t_min
    target = int(rng.integers(t_min, t_max + 1))
    mask = np.zeros((grid_h, grid_w), dtype=bool)
    if target == 0:
        return mask.reshape(-1)
    count = 0
    for _ in range(10 * n):
        if count >= target:
            break
        bh = int(rng.integers(1, grid_h + 1))
        bw = int(rng.integers(1, grid_w + 1))
        r0 = int(rng.integers(0, grid_h - bh + 1))
        c0 = int(rng.integers(0, grid_w - bw + 1))
        mask[r0:r0 + bh, c0:c0 + bw] = True
        count = int(mask.sum())
    flat = mask.reshape(-1)
    excess = int(flat.sum()) - target
    if excess > 0:
        on = np.flatnonzero(flat)
        flat[on[-excess:]] = False
    elif excess < 0:
        off = np.flatnonzero(~flat)
        flat[off[:-excess]] = True
    return flat
