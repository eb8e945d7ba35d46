"""Reference synthetic cohorts used by the CLI defaults and the test suite."""

from __future__ import annotations

import numpy as np

from .data.synth import SyntheticSpec

# Four phenotypes in two texture pairs. Within a pair the marker signature
# is (near-)identical but the blob scale differs (sigma 1.6 vs 2.4 at a
# shared mask radius of 5 px), so every per-marker mean differs by the
# fixed in-mask blob-mass ratio. The gain levels step by exactly that
# ratio, which makes the mean intensity of a tight-blob cell at gain
# level i+1 collide with a wide-blob cell at level i: mean-expression
# features alias across the pair while the spatial texture stays fully
# informative. The 0.001 offset on the last marker keeps signature rows
# distinct without being resolvable above the pixel noise.
PHENOTYPE_SIGNATURES = np.array([
    [0.90, 0.75, 0.12, 0.55, 0.10, 0.250],   # 0: tight blobs, profile P
    [0.90, 0.75, 0.12, 0.55, 0.10, 0.251],   # 1: wide blobs,  profile P
    [0.90, 0.12, 0.75, 0.10, 0.55, 0.250],   # 2: tight blobs, profile Q
    [0.90, 0.12, 0.75, 0.10, 0.55, 0.251],   # 3: wide blobs,  profile Q
])
PHENOTYPE_SIGMAS = [1.6, 2.4, 1.6, 2.4]
CELL_RADIUS = 5.0
# phase-averaged in-disk mass ratio of the two blob scales at radius 5
GAIN_STEP = 2.00745377
MARKER_NAMES = ["NUC", "CD1", "CD2", "CD3", "CD4", "CD5"]


def acceptance_spec(seed: int = 0, n_images: int = 64, image_size: int = 64,
                    cells_per_image: int = 10, noise_sigma: float = 0.08,
                    with_gains: bool = True, n_subsets: int = 2) -> SyntheticSpec:
    """The 6-marker, 4-phenotype cohort for the end-to-end experiment."""
    gain_range = (1.0, GAIN_STEP ** 3) if with_gains else None
    return SyntheticSpec(
        n_images=n_images,
        image_size=image_size,
        n_markers=6,
        n_cell_types=4,
        signatures=PHENOTYPE_SIGNATURES.copy(),
        cells_per_image=cells_per_image,
        blob_sigma_px=list(PHENOTYPE_SIGMAS),
        noise_sigma=noise_sigma,
        batch_gain_range=gain_range,
        seed=seed,
        n_subsets=n_subsets,
        marker_names=list(MARKER_NAMES),
        cell_radius_px=CELL_RADIUS,
    )


def batch_effect_spec(seed: int = 0, n_images: int = 48, image_size: int = 64,
                      separated: bool = True) -> SyntheticSpec:
    """Four gain conditions: widely separated levels, or identical (null)."""
    return SyntheticSpec(
        n_images=n_images,
        image_size=image_size,
        n_markers=6,
        n_cell_types=4,
        signatures=PHENOTYPE_SIGNATURES.copy(),
        cells_per_image=10,
        blob_sigma_px=list(PHENOTYPE_SIGMAS),
        noise_sigma=0.02,
        batch_gain_range=(1.0, 16.0) if separated else (1.0, 1.0),
        seed=seed,
        n_subsets=1,
        marker_names=list(MARKER_NAMES),
        cell_radius_px=CELL_RADIUS,
    )
