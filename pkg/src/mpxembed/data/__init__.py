from .panel import MarkerPanel, PanelError
from .store import CellRecord, MpxStore, MultiplexImage, StoreError
from .synth import PlacementError, SyntheticSpec, synth_cohort
from .normalize import MissingStatsError, NormalizationStats, compute_norm_stats
from .patching import (
    ChannelError,
    LabeledPatch,
    PatchRecord,
    augment_view,
    cell_crop,
    majority_patch_labels,
    parse_patch_id,
    patch_pixels,
    phenotype_percentages,
    select_channels,
    tessellate,
)
from .sampling import stratified_sample, worker_rng

__all__ = [
    "CellRecord", "ChannelError", "LabeledPatch", "MarkerPanel",
    "MissingStatsError", "MpxStore", "MultiplexImage", "NormalizationStats",
    "PanelError", "PatchRecord", "PlacementError", "StoreError",
    "SyntheticSpec", "augment_view", "cell_crop", "compute_norm_stats",
    "majority_patch_labels", "parse_patch_id", "patch_pixels",
    "phenotype_percentages", "select_channels", "stratified_sample",
    "synth_cohort", "tessellate", "worker_rng",
]
