from .markers import MarkerEncodingError, marker_encoding, marker_encoding_matrix
from .positions import bilinear_weights, interpolate_positions
from .vit import (
    Encoder,
    EncoderConfig,
    EncoderOutput,
    attention_zscores,
    cls_attention_by_marker,
    readout,
)
from .checkpoint import CheckpointError, load_checkpoint, load_encoder, save_checkpoint

__all__ = [
    "CheckpointError", "Encoder", "EncoderConfig", "EncoderOutput",
    "MarkerEncodingError", "attention_zscores", "bilinear_weights",
    "cls_attention_by_marker", "interpolate_positions", "load_checkpoint",
    "load_encoder", "marker_encoding", "marker_encoding_matrix", "readout",
    "save_checkpoint",
]
