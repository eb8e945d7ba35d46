"""PCA via mean-centered SVD with a deterministic sign convention."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class PCAModel:
    mean: np.ndarray                 # (d,)
    components: np.ndarray           # (k, d), orthonormal rows
    explained_variance_ratio: np.ndarray   # (k,)

    def transform(self, features: np.ndarray) -> np.ndarray:
        return (np.asarray(features, dtype=np.float64) - self.mean) @ self.components.T


def pca_fit(features, n_components: int) -> PCAModel:
    """Fit PCA; each component's largest-magnitude loading is made positive."""
    x = np.asarray(features, dtype=np.float64)
    n, d = x.shape
    if n_components > min(n, d):
        raise ValueError(f"n_components={n_components} exceeds min(n, dim)={min(n, d)}")
    mean = x.mean(axis=0)
    _, s, vt = np.linalg.svd(x - mean, full_matrices=False)
    comps = vt[:n_components]
    for i in range(len(comps)):
        j = int(np.argmax(np.abs(comps[i])))
        if comps[i, j] < 0:
            comps[i] = -comps[i]
    var = s ** 2
    total = var.sum()
    ratio = var[:n_components] / total if total > 0 else np.zeros(n_components)
    return PCAModel(mean=mean, components=comps, explained_variance_ratio=ratio)
