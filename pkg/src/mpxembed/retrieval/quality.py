"""Retrieval quality metrics: Accuracy@k and phenotype-distribution RMSE."""

from __future__ import annotations

import numpy as np

from .index import EmbeddingIndex


def accuracy_at_k(query_vectors, query_labels, index: EmbeddingIndex, k: int,
                  exclude_ids=None) -> float:
    """Fraction of queries with at least one same-label item in the top-k."""
    query_vectors = np.asarray(query_vectors)
    if index.store.labels is None:
        raise ValueError("index has no labels")
    hits = 0
    for i, (vec, label) in enumerate(zip(query_vectors, query_labels)):
        exclude = None if exclude_ids is None else exclude_ids[i]
        result = index.query_topk(vec, k, exclude_id=exclude)
        if any(index.store.labels[j] == label for j in result.indices):
            hits += 1
    return hits / len(query_vectors)


def phenotype_rmse(query_dist, retrieved_dists) -> float:
    """Min over retrieved items of the RMSE between percentage vectors."""
    q = np.asarray(query_dist, dtype=np.float64)
    best = np.inf
    for r in retrieved_dists:
        r = np.asarray(r, dtype=np.float64)
        if r.shape != q.shape:
            raise ValueError(f"phenotype class sets differ: {q.shape} vs {r.shape}")
        best = min(best, float(np.sqrt(np.mean((q - r) ** 2))))
    return best


def case_embed(patch_vectors: np.ndarray) -> np.ndarray:
    """Case vector: arithmetic mean of its patch embeddings."""
    return np.asarray(patch_vectors, dtype=np.float64).mean(axis=0)


def case_retrieval_eval(case_vectors: np.ndarray, case_labels, n_support: int = 3,
                        trials: int = 100, seed: int = 0) -> list[float]:
    """Top-1 case retrieval accuracy over repeated random support draws."""
    vectors = np.asarray(case_vectors, dtype=np.float64)
    labels = np.asarray(case_labels)
    classes = np.unique(labels)
    rng = np.random.default_rng(seed)
    accs = []
    for _ in range(trials):
        support = []
        for c in classes:
            members = np.flatnonzero(labels == c)
            if len(members) <= n_support:
                raise ValueError(f"class {c} has only {len(members)} cases")
            support.extend(members[rng.choice(len(members), n_support, replace=False)])
        support = np.array(sorted(support))
        query = np.setdiff1d(np.arange(len(labels)), support)
        d2 = ((vectors[query][:, None, :] - vectors[support][None, :, :]) ** 2).sum(axis=2)
        pred = labels[support][np.argmin(d2, axis=1)]
        accs.append(float(np.mean(pred == labels[query])))
    return accs
