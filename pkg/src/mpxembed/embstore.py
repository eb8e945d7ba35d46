"""Embedding store: JSON header plus raw little-endian float32 blob.

First line is ``MPXEMB1 <header_nbytes>``; the header carries count, dim,
dtype, and per-row metadata (ids, labels, case ids, condition tags, and
free-form extras such as phenotype percentage vectors). Round trips are
bit-exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"MPXEMB1"


class EmbeddingStoreError(RuntimeError):
    pass


@dataclass
class EmbeddingStore:
    vectors: np.ndarray                      # (n, dim) float32
    ids: list[str]
    labels: list[int] | None = None
    case_ids: list[str] | None = None
    condition_tags: list[str] | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if self.vectors.ndim != 2:
            raise EmbeddingStoreError(f"vectors must be 2-D, got {self.vectors.shape}")
        n = len(self.vectors)
        if len(self.ids) != n:
            raise EmbeddingStoreError(f"{len(self.ids)} ids for {n} vectors")
        for name in ("labels", "case_ids", "condition_tags"):
            v = getattr(self, name)
            if v is not None and len(v) != n:
                raise EmbeddingStoreError(f"{len(v)} {name} for {n} vectors")

    def __len__(self) -> int:
        return len(self.vectors)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def save(self, path) -> None:
        header = {
            "count": len(self.vectors),
            "dim": self.dim,
            "dtype": "f32le",
            "ids": self.ids,
            "labels": self.labels,
            "case_ids": self.case_ids,
            "condition_tags": self.condition_tags,
            "extra": self.extra,
        }
        raw = json.dumps(header, sort_keys=True).encode("utf-8")
        with open(path, "wb") as f:
            f.write(MAGIC + b" " + str(len(raw)).encode() + b"\n")
            f.write(raw)
            f.write(self.vectors.astype("<f4").tobytes())

    @classmethod
    def load(cls, path) -> "EmbeddingStore":
        raw = Path(path).read_bytes()
        nl = raw.index(b"\n")
        first = raw[:nl].split(b" ")
        if first[0] != MAGIC:
            raise EmbeddingStoreError(f"{path}: bad magic {first[0]!r}")
        hlen = int(first[1])
        header = json.loads(raw[nl + 1:nl + 1 + hlen].decode("utf-8"))
        blob = raw[nl + 1 + hlen:]
        expected = header["count"] * header["dim"] * 4
        if len(blob) != expected:
            raise EmbeddingStoreError(f"{path}: blob is {len(blob)} bytes, expected {expected}")
        vectors = np.frombuffer(blob, dtype="<f4").reshape(header["count"], header["dim"]).copy()
        return cls(vectors=vectors, ids=header["ids"], labels=header["labels"],
                   case_ids=header["case_ids"], condition_tags=header["condition_tags"],
                   extra=header.get("extra", {}))
