"""Batch-effect quantification: pairwise condition silhouettes in PCA space."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .clustering import silhouette
from .pca import pca_fit

MIN_PATCHES_PER_CONDITION = 3


@dataclass
class BatchEffectReport:
    pair_scores: dict[tuple[str, str], float]
    skipped: list[str] = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(list(self.pair_scores.values())))

    @property
    def std(self) -> float:
        return float(np.std(list(self.pair_scores.values())))

    def to_dict(self) -> dict:
        return {
            "pairs": {f"{a}|{b}": v for (a, b), v in sorted(self.pair_scores.items())},
            "mean": self.mean,
            "std": self.std,
            "skipped": self.skipped,
        }


def batch_effect_score(features: np.ndarray, conditions) -> BatchEffectReport:
    """Silhouette of condition labels on the first two principal components,
    for every unordered condition pair.

    A high score means patches separate by condition (a strong batch
    effect); near zero means conditions are mixed. Pairs where either
    condition has fewer than three patches are skipped with a warning.
    """
    feats = np.asarray(features, dtype=np.float64)
    conds = np.asarray(conditions)
    uniq = sorted(set(conds.tolist()))
    if len(uniq) < 2:
        raise ValueError(f"need >= 2 conditions, got {uniq}")
    scores: dict[tuple[str, str], float] = {}
    skipped = []
    for a, b in combinations(uniq, 2):
        sel = (conds == a) | (conds == b)
        if np.sum(conds == a) < MIN_PATCHES_PER_CONDITION or \
           np.sum(conds == b) < MIN_PATCHES_PER_CONDITION:
            skipped.append(f"pair ({a}, {b}) skipped: fewer than "
                           f"{MIN_PATCHES_PER_CONDITION} patches in a condition")
            continue
        pooled = feats[sel]
        proj = pca_fit(pooled, min(2, pooled.shape[1])).transform(pooled)
        scores[(a, b)] = silhouette(proj, conds[sel])
    return BatchEffectReport(pair_scores=scores, skipped=skipped)
