"""HTTP facade: embedding, index management, retrieval, and patch rendering.

Read-mostly design: queries and renders run against immutable snapshots;
dataset loads and index builds are serialized per dataset and publish
atomically (a plain attribute swap), so every response reflects exactly
one complete index, tagged by its version.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Query, Request, Response
from fastapi.responses import JSONResponse

from .. import __version__
from ..data.normalize import NormalizationStats, compute_norm_stats
from ..data.patching import parse_patch_id, patch_pixels, phenotype_percentages, tessellate
from ..data.store import MpxStore
from ..embstore import EmbeddingStore
from ..model.checkpoint import load_encoder
from ..pipeline import embed_patches
from ..retrieval import EmbeddingIndex
from .render import DEFAULT_PALETTE, RenderError, render_composite

MAX_K = 100


@dataclass
class Dataset:
    store: MpxStore
    records: dict[str, object]
    stats: NormalizationStats
    patch_size: int
    index: EmbeddingIndex | None = None
    index_version: int = 0
    building: bool = False
    lock: threading.Lock = field(default_factory=threading.Lock)


class ApiError(Exception):
    def __init__(self, status: int, error: str, detail: str = ""):
        self.status = status
        self.error = error
        self.detail = detail


class Service:
    def __init__(self, checkpoint: str | None = None, encoder=None):
        if encoder is None and checkpoint is None:
            raise ValueError("service needs a checkpoint path or an encoder")
        self.encoder = encoder or load_encoder(checkpoint)
        self.encoder.set_requires_grad(False)
        self.datasets: dict[str, Dataset] = {}
        self._load_lock = threading.Lock()

    # -- dataset lifecycle -----------------------------------------------
    def load_dataset(self, name: str, store_path: str, patch_size: int = 64,
                     patch_stride: int | None = None) -> dict:
        with self._load_lock:
            store = MpxStore.open(store_path)
            stride = patch_stride or patch_size
            stats = compute_norm_stats(store)
            records = {}
            for iid in store.image_ids:
                meta = store.image_meta(iid)
                _, h, w = meta["shape"]
                for rec in tessellate(h, w, patch_size, stride, image_id=iid,
                                      subset_tag=meta["subset_tag"],
                                      condition_tag=meta.get("condition_tag")):
                    records[rec.patch_id] = rec
            if not records:
                raise ApiError(400, "empty_dataset", f"no {patch_size}px patches in {store_path}")
            self.datasets[name] = Dataset(store=store, records=records, stats=stats,
                                          patch_size=patch_size)
            return {"dataset": name, "patches": len(records), "images": len(store.image_ids)}

    def _dataset(self, name: str) -> Dataset:
        if name not in self.datasets:
            raise ApiError(404, "unknown_dataset", f"dataset {name!r} is not loaded")
        return self.datasets[name]

    def build_index(self, name: str, readout: str = "cls", batch_size: int = 32) -> dict:
        ds = self._dataset(name)
        with ds.lock:
            if ds.building:
                raise ApiError(409, "busy", f"index build already running for {name!r}")
            ds.building = True
        try:
            ordered = sorted(ds.records)
            recs = [ds.records[p] for p in ordered]
            feats, _ = embed_patches(ds.store, self.encoder, ds.stats, recs,
                                     readout_mode=readout, batch_size=batch_size)
            n_classes = self._n_classes(ds)
            dists, labels, case_ids, conditions = [], [], [], []
            pheno_cache: dict[str, np.ndarray] = {}
            for rec in recs:
                case_ids.append(rec.image_id)
                conditions.append(rec.condition_tag)
                if ds.store.has_label_map(rec.image_id, "phenotype"):
                    if rec.image_id not in pheno_cache:
                        pheno_cache[rec.image_id] = ds.store.load_label_map(rec.image_id, "phenotype")
                    window = pheno_cache[rec.image_id][rec.row:rec.row + rec.size,
                                                       rec.col:rec.col + rec.size]
                    pct = phenotype_percentages(window, n_classes)
                    dists.append(None if pct is None else pct.tolist())
                    labels.append(-1 if pct is None else int(np.argmax(pct)))
                else:
                    dists.append(None)
                    labels.append(-1)
            emb = EmbeddingStore(vectors=feats.astype(np.float32), ids=ordered,
                                 labels=labels, case_ids=case_ids,
                                 condition_tags=conditions,
                                 extra={"phenotype_dists": dists, "readout": readout})
            index = EmbeddingIndex(emb)
            with ds.lock:
                ds.index = index
                ds.index_version += 1
                version = ds.index_version
            return {"dataset": name, "indexed": len(ordered), "index_version": version}
        finally:
            with ds.lock:
                ds.building = False

    @staticmethod
    def _n_classes(ds: Dataset) -> int:
        phenos = [c["phenotype"] for c in ds.store._cells]
        return (max(phenos) + 1) if phenos else 0

    # -- queries -----------------------------------------------------------
    def query(self, name: str, body: dict) -> dict:
        ds = self._dataset(name)
        index = ds.index
        version = ds.index_version
        if index is None:
            raise ApiError(400, "no_index", f"dataset {name!r} has no index; build one first")
        k = body.get("k", 10)
        if not isinstance(k, int) or not 1 <= k <= MAX_K:
            raise ApiError(400, "bad_k", f"k must be an integer in [1, {MAX_K}], got {k!r}")
        patch_id = body.get("patch_id")
        vector = body.get("vector")
        if (patch_id is None) == (vector is None):
            raise ApiError(400, "bad_query", "provide exactly one of patch_id or vector")
        if patch_id is not None:
            if patch_id not in ds.records:
                raise ApiError(404, "unknown_patch", f"patch {patch_id!r} not in dataset {name!r}")
            try:
                pos = index.store.ids.index(patch_id)
            except ValueError:
                raise ApiError(404, "stale_patch",
                               f"patch {patch_id!r} is not in the current index") from None
            q = index.store.vectors[pos]
            exclude = patch_id if body.get("exclude_self", True) else None
        else:
            q = np.asarray(vector, dtype=np.float64)
            if q.ndim != 1 or len(q) != index.dim:
                raise ApiError(400, "bad_vector",
                               f"vector must have dim {index.dim}, got shape {q.shape}")
            exclude = None
        result = index.query_topk(q, k, exclude_id=exclude)
        hits = []
        for i, (pid, dist) in enumerate(zip(result.ids, result.distances)):
            row = result.indices[i]
            label = index.store.labels[row] if index.store.labels else None
            pheno = index.store.extra["phenotype_dists"][row]
            hits.append({
                "id": pid,
                "distance": dist,
                "label": None if label in (None, -1) else label,
                "case_id": index.store.case_ids[row] if index.store.case_ids else None,
                "thumbnail_url": f"/datasets/{name}/patches/{pid}/composite",
                "phenotype_dist": pheno,
            })
        return {"hits": hits, "k": k, "index_version": version}

    # -- rendering / metadata ----------------------------------------------
    def patch_meta(self, name: str, patch_id: str) -> dict:
        ds = self._dataset(name)
        if patch_id not in ds.records:
            raise ApiError(404, "unknown_patch", f"patch {patch_id!r} not in dataset {name!r}")
        rec = ds.records[patch_id]
        meta = ds.store.image_meta(rec.image_id)
        pheno = None
        if ds.store.has_label_map(rec.image_id, "phenotype"):
            window = ds.store.load_label_map(rec.image_id, "phenotype")[
                rec.row:rec.row + rec.size, rec.col:rec.col + rec.size]
            pct = phenotype_percentages(window, self._n_classes(ds))
            pheno = None if pct is None else pct.tolist()
        return {
            "id": patch_id, "image_id": rec.image_id, "row": rec.row, "col": rec.col,
            "size": rec.size, "subset_tag": rec.subset_tag,
            "condition_tag": rec.condition_tag,
            "markers": [n for n, _ in ds.store.panel.entries],
            "pixel_size_um": meta["pixel_size_um"],
            "phenotype_dist": pheno,
        }

    def list_patches(self, name: str, offset: int, limit: int) -> dict:
        ds = self._dataset(name)
        ordered = sorted(ds.records)
        return {"total": len(ordered), "offset": offset,
                "patches": ordered[offset:offset + limit]}

    def composite(self, name: str, patch_id: str, channels: str | None,
                  colors: str | None) -> bytes:
        ds = self._dataset(name)
        if patch_id not in ds.records:
            raise ApiError(404, "unknown_patch", f"patch {patch_id!r} not in dataset {name!r}")
        rec = ds.records[patch_id]
        image = ds.store.load_image(rec.image_id)
        names = [n for n, _ in ds.store.panel.entries]
        if channels:
            wanted = [c.strip() for c in channels.split(",") if c.strip()]
            missing = [c for c in wanted if c.lower() not in {n.lower() for n in names}]
            if missing:
                raise ApiError(404, "unknown_marker",
                               f"markers {missing} not in panel; available: {names}")
            lower = {n.lower(): i for i, n in enumerate(names)}
            sel = [lower[c.lower()] for c in wanted]
        else:
            sel = list(range(len(names)))
        if colors:
            palette = [c.strip() for c in colors.split(",")]
            if len(palette) != len(sel):
                raise ApiError(400, "bad_colors",
                               f"{len(palette)} colors for {len(sel)} channels")
        else:
            palette = [DEFAULT_PALETTE[i % len(DEFAULT_PALETTE)] for i in range(len(sel))]
        pixels = patch_pixels(image.channels, rec)[sel]
        try:
            return render_composite(pixels, palette)
        except RenderError as exc:
            raise ApiError(400, "render_error", str(exc)) from None

    def health(self) -> dict:
        return {
            "version": __version__,
            "datasets": {
                name: {"patches": len(ds.records), "index_version": ds.index_version,
                       "indexed": ds.index is not None}
                for name, ds in sorted(self.datasets.items())
            },
        }


def create_app(checkpoint: str | None = None, encoder=None, service: Service | None = None) -> FastAPI:
    svc = service or Service(checkpoint=checkpoint, encoder=encoder)
    app = FastAPI(title="mpxembed", version=__version__)
    app.state.service = svc

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status,
                            content={"error": exc.error, "detail": exc.detail})

    @app.get("/health")
    def health():
        return svc.health()

    @app.post("/datasets/{name}/load")
    def load_dataset(name: str, body: dict):
        if "store" not in body:
            raise ApiError(400, "bad_request", "body must contain a 'store' path")
        return svc.load_dataset(name, body["store"], patch_size=body.get("patch_size", 64),
                                patch_stride=body.get("patch_stride"))

    @app.post("/datasets/{name}/index")
    def build_index(name: str, body: dict | None = None):
        body = body or {}
        return svc.build_index(name, readout=body.get("readout", "cls"),
                               batch_size=body.get("batch_size", 32))

    @app.get("/datasets/{name}/markers")
    def markers(name: str):
        ds = svc._dataset(name)
        entries = sorted(ds.store.panel.entries, key=lambda e: e[1])
        return {"markers": [{"name": n, "global_index": i} for n, i in entries],
                "nuclear": ds.store.panel.nuclear_name}

    @app.post("/datasets/{name}/query")
    def query(name: str, body: dict):
        return svc.query(name, body)

    @app.get("/datasets/{name}/patches")
    def patches(name: str, offset: int = Query(0, ge=0), limit: int = Query(24, ge=1, le=500)):
        return svc.list_patches(name, offset, limit)

    @app.get("/datasets/{name}/patches/{patch_id}/meta")
    def meta(name: str, patch_id: str):
        return svc.patch_meta(name, patch_id)

    @app.get("/datasets/{name}/patches/{patch_id}/composite")
    def composite(name: str, patch_id: str, channels: str | None = None,
                  colors: str | None = None):
        png = svc.composite(name, patch_id, channels, colors)
        return Response(content=png, media_type="image/png")

    return app
