"""Composite rendering of multiplexed patches as RGB PNGs."""

from __future__ import annotations

import io

import numpy as np
from PIL import Image

# seven visually distinct overlay colors, cycled by channel order
DEFAULT_PALETTE = ["FF3B30", "34C759", "0A84FF", "FFD60A", "FF2DAF", "00E5FF", "FFFFFF"]


class RenderError(ValueError):
    pass


def parse_color(hex_color: str) -> np.ndarray:
    h = hex_color.lstrip("#")
    if len(h) != 6:
        raise RenderError(f"color must be RRGGBB hex, got {hex_color!r}")
    try:
        return np.array([int(h[i:i + 2], 16) for i in (0, 2, 4)], dtype=np.float64) / 255.0
    except ValueError:
        raise RenderError(f"color must be RRGGBB hex, got {hex_color!r}") from None


def render_composite(channels: np.ndarray, colors: list[str]) -> bytes:
    """Additive blend of per-channel colorized intensities as PNG bytes.

    Each channel is min-max scaled to [0, 1] over the patch, multiplied by
    its color, summed, and clipped after summation.
    """
    channels = np.asarray(channels, dtype=np.float64)
    if channels.ndim != 3:
        raise RenderError(f"expected (M, h, w) channels, got {channels.shape}")
    if len(colors) != len(channels):
        raise RenderError(f"{len(colors)} colors for {len(channels)} channels")
    h, w = channels.shape[1:]
    rgb = np.zeros((h, w, 3), dtype=np.float64)
    for ch, color in zip(channels, colors):
        lo, hi = float(ch.min()), float(ch.max())
        scaled = (ch - lo) / (hi - lo) if hi > lo else np.zeros_like(ch)
        rgb += scaled[:, :, None] * parse_color(color)
    rgb = np.clip(rgb, 0.0, 1.0)
    img = Image.fromarray(np.round(rgb * 255.0).astype(np.uint8), mode="RGB")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()
