"""K-means (k-means++ seeding, Lloyd iterations), ARI, and silhouette."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class ClusterModel:
    centroids: np.ndarray                     # (K, d)
    inertia_history: list[float] = field(default_factory=list)

    @property
    def inertia(self) -> float:
        return self.inertia_history[-1]

    def predict(self, features: np.ndarray) -> np.ndarray:
        d2 = _sq_dists(np.asarray(features, dtype=np.float64), self.centroids)
        return np.argmin(d2, axis=1)


def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    return ((x[:, None, :] - c[None, :, :]) ** 2).sum(axis=2)


def _kmeanspp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(x)
    centroids = np.empty((k, x.shape[1]), dtype=np.float64)
    centroids[0] = x[int(rng.integers(n))]
    d2 = ((x - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            centroids[i] = x[int(rng.integers(n))]
            continue
        probs = d2 / total
        centroids[i] = x[int(rng.choice(n, p=probs))]
        d2 = np.minimum(d2, ((x - centroids[i]) ** 2).sum(axis=1))
    return centroids


def kmeans_fit(features, k: int, seed: int = 0, max_iter: int = 300,
               tol: float = 1e-6) -> ClusterModel:
    """Lloyd iterations from a k-means++ start; deterministic given seed.

    Empty clusters are re-seeded with the point farthest from its current
    centroid. Inertia is non-increasing across iterations.
    """
    x = np.asarray(features, dtype=np.float64)
    n = len(x)
    if n < k:
        raise ValueError(f"need at least k={k} points, got {n}")
    rng = np.random.default_rng(seed)
    centroids = _kmeanspp_init(x, k, rng)
    history = []
    prev = np.inf
    for _ in range(max_iter):
        d2 = _sq_dists(x, centroids)
        assign = np.argmin(d2, axis=1)
        point_d2 = d2[np.arange(n), assign]
        for c in range(k):
            if not np.any(assign == c):
                far = int(np.argmax(point_d2))
                assign[far] = c
                point_d2[far] = 0.0
        inertia = 0.0
        for c in range(k):
            members = x[assign == c]
            centroids[c] = members.mean(axis=0)
            inertia += float(((members - centroids[c]) ** 2).sum())
        history.append(inertia)
        if prev - inertia <= tol:
            break
        prev = inertia
    return ClusterModel(centroids=centroids, inertia_history=history)


def ari(labels_a, labels_b) -> float:
    """Adjusted Rand index via the contingency-table closed form."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if len(a) == 0:
        raise ValueError("empty labelings")
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    ua, ia = np.unique(a, return_inverse=True)
    ub, ib = np.unique(b, return_inverse=True)
    table = np.zeros((len(ua), len(ub)), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)

    def comb2(v):
        return v * (v - 1) / 2.0

    sum_ij = comb2(table).sum()
    sum_a = comb2(table.sum(axis=1)).sum()
    sum_b = comb2(table.sum(axis=0)).sum()
    total = comb2(len(a))
    expected = sum_a * sum_b / total if total else 0.0
    maximum = 0.5 * (sum_a + sum_b)
    if maximum == expected:
        return 1.0
    return float((sum_ij - expected) / (maximum - expected))


def silhouette(features, labels) -> float:
    """Mean over points of (b - a) / max(a, b) with Euclidean distances.

    Points in singleton clusters score 0.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    uniq = np.unique(y)
    if len(uniq) < 2:
        raise ValueError("silhouette needs at least two clusters")
    d = np.sqrt(np.maximum(_sq_dists(x, x), 0.0))
    scores = np.zeros(len(x))
    for i in range(len(x)):
        own = y == y[i]
        n_own = int(own.sum())
        if n_own == 1:
            scores[i] = 0.0
            continue
        a = d[i, own].sum() / (n_own - 1)
        b = min(d[i, y == c].mean() for c in uniq if c != y[i])
        m = max(a, b)
        scores[i] = 0.0 if m == 0 else (b - a) / m
    return float(scores.mean())
