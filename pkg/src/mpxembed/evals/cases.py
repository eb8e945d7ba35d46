"""Case-level feature construction, kNN classification, and MIL embedding."""

from __future__ import annotations

import numpy as np

from .clustering import kmeans_fit
from .pca import PCAModel, pca_fit


def case_cluster_features(patch_features: dict[str, np.ndarray], k: int,
                          seed: int = 0) -> tuple[dict[str, np.ndarray], object]:
    """Per-case cluster-occupancy distributions from a pooled k-means fit.

    Each case maps to the K-vector of the proportion of its patches
    assigned to each cluster (rows sum to 1).
    """
    for case, feats in patch_features.items():
        if len(feats) == 0:
            raise ValueError(f"case {case!r} has zero patches")
    cases = sorted(patch_features)
    pooled = np.concatenate([patch_features[c] for c in cases])
    model = kmeans_fit(pooled, k, seed=seed)
    out = {}
    for case in cases:
        assign = model.predict(patch_features[case])
        hist = np.bincount(assign, minlength=k).astype(np.float64)
        out[case] = hist / hist.sum()
    return out, model


def knn_case_classify(query_features: np.ndarray, support_features: np.ndarray,
                      support_labels) -> np.ndarray:
    """1-nearest-neighbor by Euclidean distance; ties go to the smallest
    support index."""
    if len(support_features) == 0:
        raise ValueError("support set is empty")
    q = np.asarray(query_features, dtype=np.float64)
    s = np.asarray(support_features, dtype=np.float64)
    labels = np.asarray(support_labels)
    d2 = ((q[:, None, :] - s[None, :, :]) ** 2).sum(axis=2)
    return labels[np.argmin(d2, axis=1)]       # argmin takes the smallest index on ties


def case_knn_eval(case_features: np.ndarray, case_labels, n_support: int = 5,
                  trials: int = 100, seed: int = 0) -> list[float]:
    """Repeated stratified support draws; per-trial query accuracy.

    Each trial draws ``n_support`` cases per class as the support set and
    classifies the remaining cases by 1-NN.
    """
    feats = np.asarray(case_features, dtype=np.float64)
    labels = np.asarray(case_labels)
    rng = np.random.default_rng(seed)
    classes = np.unique(labels)
    accs = []
    for _ in range(trials):
        support = []
        for c in classes:
            members = np.flatnonzero(labels == c)
            if len(members) <= n_support:
                raise ValueError(f"class {c} has {len(members)} cases; "
                                 f"cannot hold out {n_support} support cases")
            support.extend(members[rng.choice(len(members), n_support, replace=False)])
        support = np.array(sorted(support))
        query = np.setdiff1d(np.arange(len(labels)), support)
        pred = knn_case_classify(feats[query], feats[support], labels[support])
        accs.append(float(np.mean(pred == labels[query])))
    return accs


def fit_block_pca(train_patch_features: np.ndarray, block_dim: int,
                  pca_dim: int) -> PCAModel:
    """PCA over the pooled per-marker blocks of concatenated marker features.

    Features of width M*block_dim are split into M blocks of block_dim;
    one shared basis reduces every block to pca_dim.
    """
    feats = np.asarray(train_patch_features, dtype=np.float64)
    n, width = feats.shape
    if width % block_dim:
        raise ValueError(f"feature width {width} not divisible by block dim {block_dim}")
    if pca_dim > block_dim:
        raise ValueError(f"pca_dim {pca_dim} exceeds the per-marker feature dim {block_dim}")
    blocks = feats.reshape(n * (width // block_dim), block_dim)
    return pca_fit(blocks, pca_dim)


def mil_case_embed(case_patch_features: np.ndarray, block_pca: PCAModel,
                   block_dim: int) -> np.ndarray:
    """Mean-pooled case feature after per-marker-block PCA reduction."""
    feats = np.asarray(case_patch_features, dtype=np.float64)
    n, width = feats.shape
    m = width // block_dim
    reduced = block_pca.transform(feats.reshape(n * m, block_dim))
    per_patch = reduced.reshape(n, m * reduced.shape[1])
    return per_patch.mean(axis=0)
