"""On-disk container for multiplexed images, label maps, and cell records.

Layout: ``root/manifest.json`` plus one raw binary per raster. Pixel data
is little-endian float32, C-order ``[M, H, W]``; label maps are
little-endian int32 ``[H, W]`` with ``-1`` meaning unlabeled. The format is
dependency-free and round-trips bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .panel import MarkerPanel

MANIFEST_NAME = "manifest.json"


class StoreError(RuntimeError):
    pass


@dataclass
class MultiplexImage:
    """An M-channel float raster with marker identities attached."""

    id: str
    channels: np.ndarray            # (M, H, W) float32
    panel_refs: list[int]           # global marker index per channel
    pixel_size_um: float
    subset_tag: str = "default"
    condition_tag: str | None = None

    def __post_init__(self):
        self.channels = np.asarray(self.channels, dtype=np.float32)
        if self.channels.ndim != 3 or min(self.channels.shape) < 1:
            raise ValueError(f"channels must be (M,H,W) with positive extents, got {self.channels.shape}")
        if not np.all(np.isfinite(self.channels)):
            raise ValueError(f"image {self.id}: non-finite pixel values")
        if len(self.panel_refs) != self.channels.shape[0]:
            raise ValueError(f"image {self.id}: {len(self.panel_refs)} panel refs for {self.channels.shape[0]} channels")
        if len(set(self.panel_refs)) != len(self.panel_refs):
            raise ValueError(f"image {self.id}: duplicate panel refs {self.panel_refs}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.channels.shape


@dataclass
class CellRecord:
    """A segmented cell: centroid, mask pixels, and ground-truth phenotype."""

    id: str
    image_id: str
    centroid: tuple[float, float]        # (row, col)
    mask_pixels: np.ndarray              # (n, 2) int array of (row, col)
    phenotype: int

    def __post_init__(self):
        self.mask_pixels = np.asarray(self.mask_pixels, dtype=np.int64)
        if self.mask_pixels.size == 0:
            raise ValueError(f"cell {self.id}: empty mask")
        r, c = self.centroid
        rmin, cmin = self.mask_pixels.min(axis=0)
        rmax, cmax = self.mask_pixels.max(axis=0)
        if not (rmin <= r <= rmax and cmin <= c <= cmax):
            raise ValueError(f"cell {self.id}: centroid {self.centroid} outside mask bbox")


def _write_raster(path: Path, arr: np.ndarray, dtype: str) -> int:
    raw = np.ascontiguousarray(arr).astype(dtype, copy=False).tobytes()
    path.write_bytes(raw)
    return len(raw)


class MpxStore:
    """Immutable-after-creation store; all readers may run concurrently."""

    def __init__(self, root: Path, panel: MarkerPanel):
        self.root = Path(root)
        self.panel = panel
        self._images: dict[str, dict] = {}
        self._label_maps: dict[tuple[str, str], dict] = {}
        self._cells: list[dict] = []

    # -- creation -----------------------------------------------------------
    @classmethod
    def create(cls, root, panel: MarkerPanel) -> "MpxStore":
        root = Path(root)
        root.mkdir(parents=True, exist_ok=True)
        return cls(root, panel)

    def add_image(self, image: MultiplexImage) -> None:
        if image.id in self._images:
            raise StoreError(f"duplicate image id {image.id!r}")
        fname = f"{image.id}.bin"
        nbytes = _write_raster(self.root / fname, image.channels, "<f4")
        self._images[image.id] = {
            "id": image.id,
            "shape": list(image.channels.shape),
            "dtype": "f32le",
            "panel_refs": [int(r) for r in image.panel_refs],
            "pixel_size_um": float(image.pixel_size_um),
            "subset_tag": image.subset_tag,
            "condition_tag": image.condition_tag,
            "file": fname,
            "nbytes": nbytes,
        }

    def add_label_map(self, image_id: str, kind: str, raster: np.ndarray) -> None:
        raster = np.asarray(raster, dtype=np.int32)
        if raster.ndim != 2:
            raise StoreError(f"label map must be 2-D, got {raster.shape}")
        fname = f"{image_id}.{kind}.bin"
        nbytes = _write_raster(self.root / fname, raster, "<i4")
        self._label_maps[(image_id, kind)] = {
            "image_id": image_id,
            "kind": kind,
            "shape": list(raster.shape),
            "dtype": "i32le",
            "file": fname,
            "nbytes": nbytes,
        }

    def add_cell(self, cell: CellRecord, ordinal: int) -> None:
        """Record a cell whose mask is stored as ``ordinal`` in the instance map."""
        self._cells.append({
            "id": cell.id,
            "image_id": cell.image_id,
            "centroid": [float(cell.centroid[0]), float(cell.centroid[1])],
            "phenotype": int(cell.phenotype),
            "ordinal": int(ordinal),
        })

    def write_manifest(self) -> None:
        manifest = {
            "format": "mpxstore-v1",
            "panel": self.panel.to_dict(),
            "images": [self._images[k] for k in sorted(self._images)],
            "label_maps": [self._label_maps[k] for k in sorted(self._label_maps)],
            "cells": self._cells,
        }
        text = json.dumps(manifest, indent=1, sort_keys=True)
        (self.root / MANIFEST_NAME).write_text(text + "\n", encoding="utf-8")

    # -- reading ------------------------------------------------------------
    @classmethod
    def open(cls, root) -> "MpxStore":
        root = Path(root)
        path = root / MANIFEST_NAME
        if not path.exists():
            raise StoreError(f"no manifest at {path}")
        manifest = json.loads(path.read_text(encoding="utf-8"))
        store = cls(root, MarkerPanel.from_dict(manifest["panel"]))
        store._images = {e["id"]: e for e in manifest["images"]}
        store._label_maps = {(e["image_id"], e["kind"]): e for e in manifest["label_maps"]}
        store._cells = manifest.get("cells", [])
        return store

    @property
    def image_ids(self) -> list[str]:
        return sorted(self._images)

    def _read_raster(self, entry: dict, np_dtype, wire_dtype: str) -> np.ndarray:
        raw = (self.root / entry["file"]).read_bytes()
        if len(raw) != entry["nbytes"]:
            raise StoreError(f"{entry['file']}: expected {entry['nbytes']} bytes, found {len(raw)}")
        arr = np.frombuffer(raw, dtype=wire_dtype).reshape(entry["shape"])
        return arr.astype(np_dtype, copy=False)

    def load_image(self, image_id: str) -> MultiplexImage:
        if image_id not in self._images:
            raise StoreError(f"unknown image id {image_id!r}")
        e = self._images[image_id]
        channels = self._read_raster(e, np.float32, "<f4")
        return MultiplexImage(
            id=e["id"], channels=channels, panel_refs=list(e["panel_refs"]),
            pixel_size_um=e["pixel_size_um"], subset_tag=e["subset_tag"],
            condition_tag=e.get("condition_tag"),
        )

    def image_meta(self, image_id: str) -> dict:
        return dict(self._images[image_id])

    def has_label_map(self, image_id: str, kind: str) -> bool:
        return (image_id, kind) in self._label_maps

    def load_label_map(self, image_id: str, kind: str) -> np.ndarray:
        key = (image_id, kind)
        if key not in self._label_maps:
            raise StoreError(f"no {kind!r} label map for image {image_id!r}")
        return self._read_raster(self._label_maps[key], np.int32, "<i4")

    def cells(self, image_id: str | None = None) -> list[CellRecord]:
        """Cell records, with masks reconstructed from the instance label maps."""
        out = []
        instance_cache: dict[str, np.ndarray] = {}
        for n, meta in enumerate(self._cells):
            if image_id is not None and meta["image_id"] != image_id:
                continue
            img = meta["image_id"]
            if img not in instance_cache:
                instance_cache[img] = self.load_label_map(img, "instance")
            pix = np.argwhere(instance_cache[img] == meta["ordinal"])
            out.append(CellRecord(
                id=meta["id"], image_id=img,
                centroid=(meta["centroid"][0], meta["centroid"][1]),
                mask_pixels=pix, phenotype=meta["phenotype"],
            ))
        return out

    def images_by_subset(self) -> dict[str, list[str]]:
        groups: dict[str, list[str]] = {}
        for iid in self.image_ids:
            groups.setdefault(self._images[iid]["subset_tag"], []).append(iid)
        return groups
