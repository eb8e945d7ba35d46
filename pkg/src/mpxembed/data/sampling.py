"""Two-stage stratified sampling over tissue-technology subsets."""

from __future__ import annotations

import numpy as np


def stratified_sample(groups: dict[str, list], rng: np.random.Generator):
    """Pick a subset uniformly at random, then an item uniformly within it.

    Empty subsets are excluded from stage 1; with every subset empty this
    raises.
    """
    tags = sorted(tag for tag, items in groups.items() if items)
    if not tags:
        raise ValueError("all subsets are empty")
    tag = tags[int(rng.integers(len(tags)))]
    items = groups[tag]
    return items[int(rng.integers(len(items)))]


def worker_rng(seed: int, worker: int, stream: int = 0) -> np.random.Generator:
    """Deterministic per-worker stream via seed-sequence splitting."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(worker, stream)))
