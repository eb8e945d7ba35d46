"""Few-shot training subsets: per-class sampling and nested shot sets."""

from __future__ import annotations

import numpy as np

FEW_SHOT_SIZES = (100, 200, 500, 1000)
HUMAN_GUIDED_SHOTS = (1, 5, 10, 20)
HUMAN_GUIDED_MIN_CELLS = 50


class ClassTooSmallError(ValueError):
    pass


def few_shot_subset(labels, size: int, rng: np.random.Generator,
                    indices=None) -> np.ndarray:
    """``size`` items per class, uniformly without replacement."""
    labels = np.asarray(labels)
    pool = np.arange(len(labels)) if indices is None else np.asarray(indices)
    out = []
    for c in np.unique(labels[pool]):
        members = pool[labels[pool] == c]
        if len(members) < size:
            raise ClassTooSmallError(
                f"class {c} has {len(members)} items, fewer than the requested {size}")
        pick = rng.choice(len(members), size=size, replace=False)
        out.extend(members[np.sort(pick)])
    return np.array(sorted(out), dtype=np.int64)


def human_guided_subsets(labels, rng: np.random.Generator,
                         shots=HUMAN_GUIDED_SHOTS,
                         min_cells: int = HUMAN_GUIDED_MIN_CELLS,
                         indices=None) -> dict[int, np.ndarray]:
    """Nested shot sets per class (20-shot contains 10-shot contains ...).

    Classes with fewer than ``min_cells`` items are dropped entirely.
    Returns {shot: indices}; the k-shot set takes the first k items of each
    class's shuffled max-shot draw, so nesting holds by construction.
    """
    labels = np.asarray(labels)
    pool = np.arange(len(labels)) if indices is None else np.asarray(indices)
    shots = sorted(shots)
    max_shot = shots[-1]
    per_class_draw = {}
    for c in np.unique(labels[pool]):
        members = pool[labels[pool] == c]
        if len(members) < min_cells:
            continue
        pick = rng.choice(len(members), size=min(max_shot, len(members)), replace=False)
        per_class_draw[c] = members[pick]
    if not per_class_draw:
        raise ClassTooSmallError(f"no class has >= {min_cells} items")
    return {
        shot: np.array(sorted(np.concatenate([draw[:shot] for draw in per_class_draw.values()])),
                       dtype=np.int64)
        for shot in shots
    }
