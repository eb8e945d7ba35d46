"""Exact flat Euclidean top-k search over an embedding store."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..embstore import EmbeddingStore


class IndexError_(ValueError):
    pass


@dataclass
class QueryResult:
    ids: list[str]
    distances: list[float]
    indices: list[int]

    def __len__(self) -> int:
        return len(self.ids)


class EmbeddingIndex:
    """Immutable exact index; distance ties break by ascending id."""

    def __init__(self, store: EmbeddingStore):
        if len(store) == 0:
            raise IndexError_("cannot index an empty store")
        if len(set(store.ids)) != len(store.ids):
            raise IndexError_("duplicate ids in embedding store")
        self.store = store
        self._vectors = store.vectors.astype(np.float64)
        # precomputed rank of each id, for deterministic tie-breaking
        self._id_rank = np.argsort(np.argsort(np.asarray(store.ids)))

    def __len__(self) -> int:
        return len(self.store)

    @property
    def dim(self) -> int:
        return self.store.dim

    def query_topk(self, vector, k: int, exclude_id: str | None = None) -> QueryResult:
        """Exact k nearest neighbors by Euclidean distance.

        ``exclude_id`` removes one indexed item (self-match suppression);
        result length is min(k, remaining items).
        """
        if k < 1:
            raise IndexError_(f"k must be >= 1, got {k}")
        q = np.asarray(vector, dtype=np.float64).reshape(-1)
        if len(q) != self.dim:
            raise IndexError_(f"query dim {len(q)} does not match index dim {self.dim}")
        diff = self._vectors - q
        d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        order = np.lexsort((self._id_rank, d))
        out_ids, out_d, out_idx = [], [], []
        for i in order:
            if exclude_id is not None and self.store.ids[i] == exclude_id:
                continue
            out_ids.append(self.store.ids[i])
            out_d.append(float(d[i]))
            out_idx.append(int(i))
            if len(out_ids) == k:
                break
        return QueryResult(ids=out_ids, distances=out_d, indices=out_idx)

    def label_of(self, idx: int):
        return None if self.store.labels is None else self.store.labels[idx]


def build_index(store: EmbeddingStore) -> EmbeddingIndex:
    return EmbeddingIndex(store)
