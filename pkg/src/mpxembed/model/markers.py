"""Non-learnable sinusoidal marker-identity encodings.

Each global marker index maps to a fixed D-vector; distinct indices map to
distinct vectors, so markers unseen during training can be added at
inference by assigning them an unused index.
"""

from __future__ import annotations

import numpy as np


class MarkerEncodingError(ValueError):
    pass


def marker_encoding(index: int, dim: int) -> np.ndarray:
    """Sinusoidal encoding of one marker index as an R^dim vector.

    Component d in [0, dim/2) is sin(j / 10000^(2d/dim)); component
    d + dim/2 is the matching cosine.
    """
    if dim % 2:
        raise MarkerEncodingError(f"encoding dim must be even, got {dim}")
    if index < 0:
        raise MarkerEncodingError(f"marker index must be >= 0, got {index}")
    d = np.arange(dim // 2, dtype=np.float64)
    angle = index / np.power(10000.0, 2.0 * d / dim)
    return np.concatenate([np.sin(angle), np.cos(angle)])


def marker_encoding_matrix(indices, dim: int) -> np.ndarray:
    """Encodings for an array of marker indices: shape ``indices.shape + (dim,)``."""
    indices = np.asarray(indices)
    flat = [marker_encoding(int(j), dim) for j in indices.reshape(-1)]
    return np.stack(flat).reshape(indices.shape + (dim,))
