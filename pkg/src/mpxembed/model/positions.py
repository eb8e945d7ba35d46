"""Bilinear interpolation of the learnable positional grid.

The grid is treated as a 2-D field of D-vectors with nodes at the corners
(align-corners convention), which makes interpolation exact at source
nodes and the identity when target and source sizes match.
"""

from __future__ import annotations

import numpy as np

_weight_cache: dict[tuple[int, int], np.ndarray] = {}


def bilinear_weights(source: int, target: int) -> np.ndarray:
    """(target^2, source^2) matrix mapping a flattened grid to the target grid."""
    if target < 1 or source < 1:
        raise ValueError(f"grid sizes must be >= 1, got source={source}, target={target}")
    key = (source, target)
    if key in _weight_cache:
        return _weight_cache[key]
    if target == 1:
        coords = np.array([(source - 1) / 2.0])
    else:
        coords = np.arange(target, dtype=np.float64) * (source - 1) / (target - 1)
    lo = np.floor(coords).astype(int)
    lo = np.minimum(lo, source - 2) if source > 1 else np.zeros_like(lo)
    frac = coords - lo if source > 1 else np.zeros_like(coords)

    w = np.zeros((target * target, source * source), dtype=np.float64)
    for ti in range(target):
        for tj in range(target):
            i0, fj = lo[ti], frac[tj]
            fi, j0 = frac[ti], lo[tj]
            row = ti * target + tj
            if source == 1:
                w[row, 0] = 1.0
                continue
            w[row, i0 * source + j0] += (1 - fi) * (1 - fj)
            w[row, i0 * source + j0 + 1] += (1 - fi) * fj
            w[row, (i0 + 1) * source + j0] += fi * (1 - fj)
            w[row, (i0 + 1) * source + j0 + 1] += fi * fj
    _weight_cache[key] = w
    return w


def interpolate_positions(grid: np.ndarray, target: int) -> np.ndarray:
    """Resample a (G*G, D) position table to (target^2, D).

    Identity (bit-exact) when target equals the source size.
    """
    g2, dim = grid.shape
    source = int(round(np.sqrt(g2)))
    if source * source != g2:
        raise ValueError(f"position grid must be square, got {g2} rows")
    if target == source:
        return grid
    w = bilinear_weights(source, target).astype(grid.dtype)
    return w @ grid
