"""Embedding extraction pipelines shared by the CLI, service, and tests."""

from __future__ import annotations

import numpy as np

from .autograd import no_grad
from .data.normalize import NormalizationStats
from .data.patching import PatchRecord, cell_crop, patch_pixels
from .data.store import MpxStore
from .model.vit import Encoder, EncoderConfig, cls_attention_by_marker, readout


def random_encoder(config: EncoderConfig, seed: int = 0) -> Encoder:
    """Freshly initialized encoder (the random-features control)."""
    enc = Encoder.init(config, np.random.default_rng(seed))
    enc.set_requires_grad(False)
    return enc


def _batched(items, size):
    for i in range(0, len(items), size):
        yield items[i:i + size]


def embed_stack(encoder: Encoder, pixels: np.ndarray, marker_ids,
                readout_mode: str = "marker", batch_size: int = 32,
                keep_attention: bool = False):
    """Encode a (n, M, h, w) stack; returns features plus optional attention scores.

    Feature shape per mode: cls (n, D); marker (n, M*D); token (n, N, M*D).
    """
    feats = []
    attn_scores = [] if keep_attention else None
    with no_grad():
        for chunk in _batched(np.arange(len(pixels)), batch_size):
            out = encoder.encode(pixels[chunk], marker_ids, keep_attention=keep_attention)
            feats.append(readout(out, readout_mode))
            if keep_attention:
                attn_scores.append(cls_attention_by_marker(out))
    features = np.concatenate(feats)
    if keep_attention:
        return features, np.concatenate(attn_scores)
    return features, None


def embed_patches(store: MpxStore, encoder: Encoder, stats: NormalizationStats,
                  records: list[PatchRecord], readout_mode: str = "marker",
                  batch_size: int = 32, keep_attention: bool = False):
    """Embed tessellation patches; all records must share one marker panel."""
    ref_sets = {tuple(store.image_meta(r.image_id)["panel_refs"]) for r in records}
    if len(ref_sets) != 1:
        raise ValueError(f"patches span {len(ref_sets)} different marker panels")
    marker_ids = list(ref_sets.pop())

    cache: dict[str, np.ndarray] = {}

    def normalized(image_id):
        if image_id not in cache:
            cache[image_id] = stats.apply_image(store.load_image(image_id))
        return cache[image_id]

    pixels = np.stack([patch_pixels(normalized(r.image_id), r) for r in records])
    return embed_stack(encoder, pixels, marker_ids, readout_mode, batch_size,
                       keep_attention)


def embed_cells(store: MpxStore, encoder: Encoder, stats: NormalizationStats,
                cells, crop_size: int = 64, readout_mode: str = "marker",
                batch_size: int = 32):
    """Embed zero-masked cell crops; returns (features, labels, cell_ids, image_ids)."""
    ref_sets = {tuple(store.image_meta(c.image_id)["panel_refs"]) for c in cells}
    if len(ref_sets) != 1:
        raise ValueError(f"cells span {len(ref_sets)} different marker panels")
    marker_ids = list(ref_sets.pop())

    cache: dict[str, np.ndarray] = {}

    def normalized(image_id):
        if image_id not in cache:
            cache[image_id] = stats.apply_image(store.load_image(image_id))
        return cache[image_id]

    crops = np.stack([
        cell_crop(normalized(c.image_id), c.centroid, c.mask_pixels, crop_size)
        for c in cells
    ])
    features, _ = embed_stack(encoder, crops, marker_ids, readout_mode, batch_size)
    labels = np.array([c.phenotype for c in cells], dtype=np.int64)
    return features, labels, [c.id for c in cells], [c.image_id for c in cells]
