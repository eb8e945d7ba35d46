"""Dense label rasters from token-level classification plus morphological cleanup."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import binary_dilation, binary_erosion

_STRUCT = np.ones((3, 3), dtype=bool)


def _opening(mask: np.ndarray) -> np.ndarray:
    # border_value=1 on erosion keeps a uniform mask invariant at the frame
    return binary_dilation(binary_erosion(mask, _STRUCT, border_value=1), _STRUCT, border_value=0)


def _closing(mask: np.ndarray) -> np.ndarray:
    return binary_erosion(binary_dilation(mask, _STRUCT, border_value=0), _STRUCT, border_value=1)


def morphological_cleanup(labels: np.ndarray) -> np.ndarray:
    """Per-class binary opening then closing; overlaps resolve to the
    smallest class id, uncovered pixels keep their original label."""
    classes = np.unique(labels)
    out = labels.copy()
    assigned = np.zeros(labels.shape, dtype=bool)
    for c in sorted(classes.tolist()):
        cleaned = _closing(_opening(labels == c))
        take = cleaned & ~assigned
        out[take] = c
        assigned |= take
    out[~assigned] = labels[~assigned]
    return out


def dense_predict_map(token_features: np.ndarray, classifier, grid: tuple[int, int],
                      token_stride: int, cleanup: bool = True) -> np.ndarray:
    """Classify each token location and upsample to a pixel label raster.

    ``token_features``: (N, feat) rows in row-major grid order;
    ``classifier`` exposes ``predict``. The raster extent is the token grid
    times the stride; upsampling is nearest neighbor.
    """
    nh, nw = grid
    labels = np.asarray(classifier.predict(token_features), dtype=np.int32).reshape(nh, nw)
    raster = np.repeat(np.repeat(labels, token_stride, axis=0), token_stride, axis=1)
    if cleanup:
        raster = morphological_cleanup(raster)
    return raster
