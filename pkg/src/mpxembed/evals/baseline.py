"""Mean marker-expression baseline features."""

from __future__ import annotations

import numpy as np


def mean_marker_baseline(pixels: np.ndarray) -> np.ndarray:
    """Per-channel mean over all pixels of a (M, h, w) patch or cell crop.

    For zero-masked cell crops the denominator is deliberately the full
    crop area, so the baseline consumes exactly the same input as the
    encoder.
    """
    pixels = np.asarray(pixels)
    return pixels.reshape(pixels.shape[0], -1).mean(axis=1)
