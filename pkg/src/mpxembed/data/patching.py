"""Patch extraction, augmentation, channel selection, and label derivation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ChannelError(ValueError):
    pass


@dataclass(frozen=True)
class PatchRecord:
    image_id: str
    row: int
    col: int
    size: int
    subset_tag: str = "default"
    condition_tag: str | None = None

    @property
    def patch_id(self) -> str:
        return f"{self.image_id}:{self.row}:{self.col}:{self.size}"


def parse_patch_id(patch_id: str) -> PatchRecord:
    image_id, row, col, size = patch_id.rsplit(":", 3)
    return PatchRecord(image_id=image_id, row=int(row), col=int(col), size=int(size))


def tessellate(extent_h: int, extent_w: int, size: int, stride: int,
               image_id: str = "", tissue_mask: np.ndarray | None = None,
               subset_tag: str = "default", condition_tag: str | None = None,
               min_coverage: float = 0.5) -> list[PatchRecord]:
    """Grid of patch origins; origin+size never exceeds the extent.

    Patches covering less than ``min_coverage`` of in-mask pixels are
    dropped when a tissue mask is given. An oversized ``size`` yields an
    empty list rather than an error.
    """
    if size < 1 or stride < 1:
        raise ValueError(f"size and stride must be >= 1, got {size}, {stride}")
    if stride > size:
        raise ValueError(f"stride {stride} exceeds size {size}")
    out = []
    if size > extent_h or size > extent_w:
        return out
    for r in range(0, extent_h - size + 1, stride):
        for c in range(0, extent_w - size + 1, stride):
            if tissue_mask is not None:
                frac = float(tissue_mask[r:r + size, c:c + size].mean())
                if frac < min_coverage:
                    continue
            out.append(PatchRecord(image_id=image_id, row=r, col=c, size=size,
                                   subset_tag=subset_tag, condition_tag=condition_tag))
    return out


def patch_pixels(channels: np.ndarray, rec: PatchRecord) -> np.ndarray:
    return channels[:, rec.row:rec.row + rec.size, rec.col:rec.col + rec.size]


def augment_view(patch: np.ndarray, crop_size: int, rng: np.random.Generator) -> np.ndarray:
    """Random crop + flips + 90-degree CCW rotations, identical across channels.

    Flips happen before rotation; every step is an exact pixel permutation,
    so the per-channel value multiset is preserved.
    """
    m, h, w = patch.shape
    if crop_size > h or crop_size > w:
        raise ValueError(f"crop_size {crop_size} exceeds patch extents {(h, w)}")
    r0 = int(rng.integers(0, h - crop_size + 1))
    c0 = int(rng.integers(0, w - crop_size + 1))
    view = patch[:, r0:r0 + crop_size, c0:c0 + crop_size]
    if rng.random() < 0.5:
        view = view[:, :, ::-1]
    if rng.random() < 0.5:
        view = view[:, ::-1, :]
    k = int(rng.integers(0, 4))
    if k:
        view = np.rot90(view, k, axes=(1, 2))
    return np.ascontiguousarray(view)


def select_channels(patch: np.ndarray, panel_refs, nuclear_ref: int,
                    rng: np.random.Generator) -> tuple[np.ndarray, list[int]]:
    """Pick the nuclear channel plus two random distinct protein channels.

    Output channel 0 is always the nuclear marker; the two protein channels
    are drawn uniformly without replacement.
    """
    refs = list(panel_refs)
    if nuclear_ref not in refs:
        raise ChannelError(f"nuclear marker {nuclear_ref} absent from panel refs {refs}")
    others = [i for i, r in enumerate(refs) if r != nuclear_ref]
    if len(others) < 2:
        raise ChannelError(f"need >= 2 non-nuclear channels, have {len(others)}")
    nuc_pos = refs.index(nuclear_ref)
    pick = rng.choice(len(others), size=2, replace=False)
    sel = [nuc_pos, others[int(pick[0])], others[int(pick[1])]]
    return patch[sel], [refs[i] for i in sel]


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def cell_crop(normalized_channels: np.ndarray, centroid: tuple[float, float],
              mask_pixels: np.ndarray, size: int = 64) -> np.ndarray:
    """Zero-masked single-cell crop centered at the rounded centroid.

    ``normalized_channels`` must already be standardized; everything
    outside the cell mask (and outside the image) is exactly zero, which is
    the post-normalization background value.
    """
    if size % 2:
        raise ValueError(f"crop size must be even, got {size}")
    m, h, w = normalized_channels.shape
    r0 = _round_half_up(centroid[0]) - size // 2
    c0 = _round_half_up(centroid[1]) - size // 2
    out = np.zeros((m, size, size), dtype=normalized_channels.dtype)
    rows = mask_pixels[:, 0]
    cols = mask_pixels[:, 1]
    keep = (rows >= r0) & (rows < r0 + size) & (cols >= c0) & (cols < c0 + size)
    rows, cols = rows[keep], cols[keep]
    out[:, rows - r0, cols - c0] = normalized_channels[:, rows, cols]
    return out


@dataclass(frozen=True)
class LabeledPatch:
    row: int
    col: int
    size: int
    label: int
    dominance: float


def majority_patch_labels(phenotype_map: np.ndarray, size: int = 32, stride: int = 16,
                          threshold: float = 1.0) -> list[LabeledPatch]:
    """Label each window by pixel-majority phenotype, filtered by dominance.

    Dominance is the majority count over the count of labeled pixels; ties
    resolve to the smallest class id, and windows with no labeled pixels
    are dropped.
    """
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    h, w = phenotype_map.shape
    out = []
    for r in range(0, h - size + 1, stride):
        for c in range(0, w - size + 1, stride):
            win = phenotype_map[r:r + size, c:c + size]
            labeled = win[win >= 0]
            if labeled.size == 0:
                continue
            counts = np.bincount(labeled)
            label = int(np.argmax(counts))  # argmax returns the smallest index on ties
            dominance = float(counts[label]) / float(labeled.size)
            if dominance >= threshold:
                out.append(LabeledPatch(row=r, col=c, size=size, label=label,
                                        dominance=dominance))
    return out


def phenotype_percentages(phenotype_map_window: np.ndarray, n_classes: int) -> np.ndarray | None:
    """Percentage vector (sums to 100) of labeled pixels; None if none labeled."""
    labeled = phenotype_map_window[phenotype_map_window >= 0]
    if labeled.size == 0:
        return None
    counts = np.bincount(labeled, minlength=n_classes).astype(np.float64)
    return counts / labeled.size * 100.0
