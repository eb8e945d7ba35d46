"""Dataset-wide per-marker normalization statistics."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .store import MpxStore, MultiplexImage

STD_FLOOR = 1e-6


class MissingStatsError(KeyError):
    pass


class NormalizationStats:
    """Per-global-marker mean/std over all pixels of the dataset (population std)."""

    def __init__(self, stats: dict[int, tuple[float, float]]):
        self._stats = {int(k): (float(m), max(float(s), STD_FLOOR)) for k, (m, s) in stats.items()}

    def __contains__(self, marker_index: int) -> bool:
        return int(marker_index) in self._stats

    def mean_std(self, marker_index: int) -> tuple[float, float]:
        try:
            return self._stats[int(marker_index)]
        except KeyError:
            raise MissingStatsError(f"no normalization stats for marker index {marker_index}") from None

    def apply(self, channels: np.ndarray, panel_refs) -> np.ndarray:
        """Standardize each channel by its marker's dataset statistics."""
        out = np.empty_like(channels, dtype=np.float32)
        for i, ref in enumerate(panel_refs):
            mean, std = self.mean_std(ref)
            out[i] = (channels[i] - mean) / std
        return out

    def apply_image(self, image: MultiplexImage) -> np.ndarray:
        return self.apply(image.channels, image.panel_refs)

    def save(self, path) -> None:
        payload = {str(k): {"mean": m, "std": s} for k, (m, s) in sorted(self._stats.items())}
        Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "NormalizationStats":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls({int(k): (v["mean"], v["std"]) for k, v in payload.items()})


def compute_norm_stats(store: MpxStore) -> NormalizationStats:
    """Accumulate per-marker mean/std over every pixel of every image."""
    if not store.image_ids:
        raise ValueError("store is empty")
    acc: dict[int, list[float]] = {}
    for iid in store.image_ids:
        image = store.load_image(iid)
        for ch, ref in zip(image.channels, image.panel_refs):
            s = acc.setdefault(int(ref), [0.0, 0.0, 0.0])
            ch64 = ch.astype(np.float64)
            s[0] += float(ch64.sum())
            s[1] += float(np.dot(ch64.reshape(-1), ch64.reshape(-1)))
            s[2] += ch64.size
    stats = {}
    for ref, (total, sq, n) in acc.items():
        mean = total / n
        var = max(sq / n - mean * mean, 0.0)
        stats[ref] = (mean, np.sqrt(var))
    return NormalizationStats(stats)
