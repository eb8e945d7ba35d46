"""Checkpoint container: text header + raw little-endian float32 blob.

First line is ``MPXCKPT1 <header_nbytes>``; the JSON header carries the
encoder config and a parameter manifest (name, shape, byte offset); the
blob holds the parameters back to back. Round trips are bit-exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..autograd.tensor import Tensor
from .vit import Encoder, EncoderConfig

MAGIC = b"MPXCKPT1"


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(path, config: EncoderConfig, params: dict, extra: dict | None = None) -> None:
    """Write config + named parameter arrays; accepts Tensors or numpy arrays."""
    arrays = {k: (v.data if isinstance(v, Tensor) else np.asarray(v)) for k, v in params.items()}
    manifest = []
    offset = 0
    blobs = []
    for name in sorted(arrays):
        raw = np.ascontiguousarray(arrays[name]).astype("<f4").tobytes()
        manifest.append({"name": name, "shape": list(arrays[name].shape),
                         "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    header = {
        "config": config.to_dict(),
        "dtype": "f32le",
        "params": manifest,
        "extra": extra or {},
    }
    header_raw = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC + b" " + str(len(header_raw)).encode() + b"\n")
        f.write(header_raw)
        for raw in blobs:
            f.write(raw)


def load_checkpoint(path) -> tuple[EncoderConfig, dict[str, np.ndarray], dict]:
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    first = raw[:nl].split(b" ")
    if first[0] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic {first[0]!r})")
    hlen = int(first[1])
    header = json.loads(raw[nl + 1:nl + 1 + hlen].decode("utf-8"))
    blob = raw[nl + 1 + hlen:]
    params = {}
    for entry in header["params"]:
        n = entry["nbytes"]
        arr = np.frombuffer(blob[entry["offset"]:entry["offset"] + n], dtype="<f4")
        params[entry["name"]] = arr.reshape(entry["shape"]).copy()
    return EncoderConfig.from_dict(header["config"]), params, header.get("extra", {})


def load_encoder(path, dtype=np.float32, requires_grad: bool = False) -> Encoder:
    config, arrays, _ = load_checkpoint(path)
    params = {k: Tensor(v.astype(dtype), requires_grad=requires_grad, dtype=dtype)
              for k, v in arrays.items()}
    return Encoder(config, params)
