from .config import PretrainConfig, desk_pretrain_config, schedule_value
from .losses import CenteredDistillationLoss, MaskedTokenLoss, ProjectionHead, ema_update
from .masking import block_mask
from .trainer import PreparedBatch, Pretrainer, ViewGroup
from .views import View, build_views, draw_sides, snap_side

__all__ = [
    "CenteredDistillationLoss", "MaskedTokenLoss", "PreparedBatch",
    "PretrainConfig", "Pretrainer", "ProjectionHead", "View", "ViewGroup",
    "block_mask", "build_views", "desk_pretrain_config", "draw_sides",
    "ema_update", "schedule_value", "snap_side",
]
