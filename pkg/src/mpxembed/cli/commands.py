"""Implementations behind the CLI subcommands.

Every command writes its outputs under ``--out`` and echoes the effective
configuration there; pipelines compose through files only (store ->
checkpoint -> embedding store -> report).
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from .. import cohorts
from ..data.normalize import NormalizationStats, compute_norm_stats
from ..data.patching import majority_patch_labels, parse_patch_id, patch_pixels, \
    phenotype_percentages, tessellate, cell_crop
from ..data.store import MpxStore
from ..data.synth import synth_cohort
from ..embstore import EmbeddingStore
from ..evals import (
    ProbeConfig,
    aggregate_reports,
    ari,
    batch_effect_score,
    case_cluster_features,
    case_knn_eval,
    classify_metrics,
    few_shot_subset,
    fit_block_pca,
    fit_logreg,
    human_guided_subsets,
    kmeans_fit,
    mann_whitney_u,
    mean_marker_baseline,
    mil_case_embed,
    pca_fit,
    probe_cv,
    save_report,
    train_val_split,
    make_folds,
    dense_predict_map,
)
from ..model.checkpoint import load_encoder
from ..model.vit import EncoderConfig, attention_zscores
from ..pipeline import embed_cells, embed_patches, embed_stack, random_encoder
from ..pretrain.config import PretrainConfig
from ..pretrain.trainer import Pretrainer
from ..retrieval import EmbeddingIndex, accuracy_at_k, case_embed, case_retrieval_eval, \
    phenotype_rmse
from .config import echo_config, load_config

logger = logging.getLogger("mpxembed")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_encoder_arg(args, encoder_cfg: dict):
    if getattr(args, "random_init", False):
        return random_encoder(EncoderConfig.from_dict(encoder_cfg), seed=args.seed)
    if not args.checkpoint:
        raise FileNotFoundError("either --checkpoint or --random-init is required")
    return load_encoder(args.checkpoint)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")


# -- synth -------------------------------------------------------------------

def cmd_synth(args) -> int:
    cfg = load_config(args.config, {"seed": args.seed} if args.seed is not None else None)
    out = _out_dir(args)
    s = dict(cfg["synth"])
    for key in ("n_images", "image_size", "cells_per_image", "noise_sigma", "n_subsets"):
        val = getattr(args, key, None)
        if val is not None:
            s[key] = val
    if args.no_gains:
        s["with_gains"] = False
    spec = cohorts.acceptance_spec(seed=cfg["seed"], **s)
    store = synth_cohort(spec, out / "store")
    echo_config({**cfg, "synth": s}, out)
    logger.info("wrote %d images to %s", len(store.image_ids), out / "store")
    return 0


# -- pretrain ----------------------------------------------------------------

def cmd_pretrain(args) -> int:
    overrides: dict = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    cfg = load_config(args.config, overrides)
    if args.steps is not None:
        cfg["pretrain"]["total_steps"] = args.steps
    if args.batch_size is not None:
        cfg["pretrain"]["batch_size"] = args.batch_size
    cfg["pretrain"]["seed"] = cfg["seed"]
    out = _out_dir(args)
    echo_config(cfg, out)
    store = MpxStore.open(args.store)
    trainer = Pretrainer(store, EncoderConfig.from_dict(cfg["encoder"]),
                         PretrainConfig.from_dict(cfg["pretrain"]), workers=cfg["workers"])
    trainer.run(out, log_every=args.log_every, checkpoint_every=args.checkpoint_every)
    logger.info("final checkpoint at %s", out / "checkpoint_final.ckpt")
    return 0


# -- embed -------------------------------------------------------------------

def _patch_records(store: MpxStore, size: int, stride: int):
    records = []
    for iid in store.image_ids:
        meta = store.image_meta(iid)
        _, h, w = meta["shape"]
        records.extend(tessellate(h, w, size, stride, image_id=iid,
                                  subset_tag=meta["subset_tag"],
                                  condition_tag=meta.get("condition_tag")))
    return records


def _n_classes(store: MpxStore) -> int:
    phenos = [c["phenotype"] for c in store._cells]
    return (max(phenos) + 1) if phenos else 0


def cmd_embed(args) -> int:
    cfg = load_config(args.config, {"seed": args.seed} if args.seed is not None else None)
    out = _out_dir(args)
    store = MpxStore.open(args.store)
    stats = compute_norm_stats(store)
    encoder = _load_encoder_arg(args, cfg["encoder"])
    readout = args.readout or cfg["probe"]["readout"]

    if args.unit == "cell":
        cells = store.cells()
        if not cells:
            raise ValueError(f"store {args.store} has no cell records")
        feats, labels, ids, image_ids = embed_cells(
            store, encoder, stats, cells, crop_size=cfg["probe"]["crop_size"],
            readout_mode=readout, batch_size=args.batch_size)
        emb = EmbeddingStore(vectors=feats.astype(np.float32), ids=ids,
                             labels=[int(v) for v in labels], case_ids=image_ids,
                             condition_tags=[store.image_meta(i).get("condition_tag")
                                             for i in image_ids],
                             extra={"unit": "cell", "readout": readout})
    else:
        size = args.patch_size or cfg["patch"]["size"]
        stride = args.patch_stride or size
        records = _patch_records(store, size, stride)
        if not records:
            raise ValueError(f"no {size}px patches in {args.store}")
        feats, _ = embed_patches(store, encoder, stats, records, readout_mode=readout,
                                 batch_size=args.batch_size)
        if readout == "token":
            feats = feats.reshape(len(records), -1)
        n_classes = _n_classes(store)
        labels, dists = [], []
        pheno_cache: dict[str, np.ndarray] = {}
        for rec in records:
            if store.has_label_map(rec.image_id, "phenotype"):
                if rec.image_id not in pheno_cache:
                    pheno_cache[rec.image_id] = store.load_label_map(rec.image_id, "phenotype")
                window = pheno_cache[rec.image_id][rec.row:rec.row + rec.size,
                                                   rec.col:rec.col + rec.size]
                pct = phenotype_percentages(window, n_classes)
                dists.append(None if pct is None else pct.tolist())
                labels.append(-1 if pct is None else int(np.argmax(pct)))
            else:
                dists.append(None)
                labels.append(-1)
        emb = EmbeddingStore(vectors=feats.astype(np.float32),
                             ids=[r.patch_id for r in records], labels=labels,
                             case_ids=[r.image_id for r in records],
                             condition_tags=[r.condition_tag for r in records],
                             extra={"unit": "patch", "readout": readout,
                                    "phenotype_dists": dists, "patch_size": size})
    emb.save(out / args.name)
    echo_config(cfg, out)
    logger.info("wrote %d x %d embeddings to %s", len(emb), emb.dim, out / args.name)
    return 0


# -- probe -------------------------------------------------------------------

def _load_labeled(path) -> EmbeddingStore:
    emb = EmbeddingStore.load(path)
    if emb.labels is None:
        raise ValueError(f"{path} has no labels")
    return emb


def cmd_probe(args) -> int:
    cfg = load_config(args.config, {"seed": args.seed} if args.seed is not None else None)
    out = _out_dir(args)
    emb = _load_labeled(args.embeddings)
    labels = np.asarray(emb.labels)
    keep = labels >= 0
    feats = emb.vectors[keep].astype(np.float64)
    labels = labels[keep]
    groups = [emb.case_ids[i] for i in np.flatnonzero(keep)]
    pcfg = ProbeConfig(c_grid=list(np.logspace(-10, 5, cfg["probe"]["c_points"])),
                       max_iter=cfg["probe"]["max_iter"],
                       fixed_c=1.0 if args.human_guided else None)
    seed = cfg["seed"]

    if args.test_embeddings:
        test = _load_labeled(args.test_embeddings)
        pool = np.arange(len(labels))
        train_idx, val_idx = train_val_split(pool, labels, seed=seed)
        from ..evals.probe import probe_fold

        _, report, best_c = probe_fold(
            np.concatenate([feats, test.vectors.astype(np.float64)]),
            np.concatenate([labels, np.asarray(test.labels)]),
            train_idx, val_idx,
            np.arange(len(labels), len(labels) + len(test)), pcfg)
        payload = {"protocol": "cross-dataset", "selected_c": best_c,
                   "report": report.to_dict()}
        save_report(out / "probe_report.json", payload)
        return 0

    train_filter = None
    if args.human_guided:
        rng = np.random.default_rng(seed)

        def train_filter(pool, fold, y):
            subsets = human_guided_subsets(y, rng, indices=pool)
            return subsets[args.shots]
    elif args.few_shot:
        rng = np.random.default_rng(seed)

        def train_filter(pool, fold, y):
            return few_shot_subset(y, args.few_shot, rng, indices=pool)

    reports, folds = probe_cv(feats, labels, groups, pcfg,
                              n_folds=cfg["probe"]["n_folds"], seed=seed,
                              train_filter=train_filter)
    payload = {
        "protocol": ("human-guided" if args.human_guided
                     else f"few-shot-{args.few_shot}" if args.few_shot else "full"),
        "folds": [r.to_dict() for r in reports],
        "aggregate": aggregate_reports(reports),
    }
    save_report(out / "probe_report.json", payload)
    echo_config(cfg, out)
    agg = payload["aggregate"]["balanced_accuracy"]
    logger.info("balanced accuracy %.4f +/- %.4f", agg["mean"], agg["std"])
    return 0


# -- zeroshot ------------------------------------------------------------------

def cmd_zeroshot(args) -> int:
    cfg = load_config(args.config, {"seed": args.seed} if args.seed is not None else None)
    out = _out_dir(args)
    emb = _load_labeled(args.embeddings)
    labels = np.asarray(emb.labels)
    keep = labels >= 0
    feats = emb.vectors[keep].astype(np.float64)
    labels = labels[keep]
    k = args.k or len(np.unique(labels))
    model = kmeans_fit(feats, k, seed=cfg["seed"])
    assign = model.predict(feats)
    payload = {"k": k, "ari": ari(labels, assign), "inertia": model.inertia,
               "n_items": int(keep.sum())}
    save_report(out / "zeroshot_report.json", payload)
    logger.info("zero-shot ARI %.4f (k=%d)", payload["ari"], k)
    return 0


# -- patchpheno ----------------------------------------------------------------

def cmd_patchpheno(args) -> int:
    cfg = load_config(args.config, {"seed": args.seed} if args.seed is not None else None)
    out = _out_dir(args)
    store = MpxStore.open(args.store)
    stats = compute_norm_stats(store)
    encoder = _load_encoder_arg(args, cfg["encoder"])
    thresholds = [float(t) for t in args.thresholds.split(",")]
    size, stride = args.size, args.stride

    all_records, all_labels, all_dominance = [], [], []
    for iid in store.image_ids:
        pheno = store.load_label_map(iid, "phenotype")
        for lp in majority_patch_labels(pheno, size=size, stride=stride, threshold=min(thresholds)):
            all_records.append((iid, lp))
            all_labels.append(lp.label)
            all_dominance.append(lp.dominance)
    if not all_records:
        raise ValueError("no labeled patches at the lowest threshold")

    from ..data.patching import PatchRecord

    records = [PatchRecord(image_id=iid, row=lp.row, col=lp.col, size=size)
               for iid, lp in all_records]
    feats, _ = embed_patches(store, encoder, stats, records,
                             readout_mode=cfg["probe"]["readout"], batch_size=args.batch_size)
    labels = np.asarray(all_labels)
    dominance = np.asarray(all_dominance)
    groups = np.asarray([iid for iid, _ in all_records])

    pcfg = ProbeConfig(c_grid=list(np.logspace(-10, 5, cfg["probe"]["c_points"])),
                       max_iter=cfg["probe"]["max_iter"])
    results = {}
    for thr in thresholds:
        keep = dominance >= thr
        if len(np.unique(labels[keep])) < 2:
            results[str(thr)] = {"error": "fewer than 2 classes above threshold"}
            continue
        reports, _ = probe_cv(feats[keep], labels[keep], groups[keep].tolist(), pcfg,
                              n_folds=cfg["probe"]["n_folds"], seed=cfg["seed"])
        results[str(thr)] = {"n_patches": int(keep.sum()),
                             "aggregate": aggregate_reports(reports)}
        logger.info("threshold %.1f: %d patches, BA %.4f", thr, keep.sum(),
                    results[str(thr)]["aggregate"]["balanced_accuracy"]["mean"])
    save_report(out / "patchpheno_report.json", {"threshold_results": results})
    echo_config(cfg, out)
    return 0


# -- densemap ------------------------------------------------------------------

def cmd_densemap(args) -> int:
    cfg = load_config(args.config, {"seed": args.seed} if args.seed is not None else None)
    out = _out_dir(args)
    store = MpxStore.open(args.store)
    stats = compute_norm_stats(store)
    encoder = _load_encoder_arg(args, cfg["encoder"])
    enc_cfg = encoder.config
    stride = enc_cfg.token_stride

    feats_per_image, labels_per_image, grids = {}, {}, {}
    for iid in store.image_ids:
        image = store.load_image(iid)
        pheno = store.load_label_map(iid, "phenotype")
        _, h, w = image.shape
        tokens, _ = embed_stack(encoder, stats.apply_image(image)[None], image.panel_refs,
                                readout_mode="token")
        nh = (h - enc_cfg.token_size) // stride + 1
        nw = (w - enc_cfg.token_size) // stride + 1
        labels = np.full(nh * nw, -1, dtype=np.int64)
        for i, lp in enumerate(majority_patch_labels(pheno, size=enc_cfg.token_size,
                                                     stride=stride, threshold=1e-9)):
            labels[(lp.row // stride) * nw + (lp.col // stride)] = lp.label
        feats_per_image[iid] = tokens[0]
        labels_per_image[iid] = labels
        grids[iid] = (nh, nw)

    ids = store.image_ids
    folds = make_folds(ids, n_folds=min(cfg["probe"]["n_folds"], len(ids)), seed=cfg["seed"])
    raster_store = MpxStore.create(out / "rasters", store.panel)
    accuracies = []
    for fold in sorted(set(folds.tolist())):
        test_ids = [iid for iid, f in zip(ids, folds) if f == fold]
        train_ids = [iid for iid, f in zip(ids, folds) if f != fold]
        xs = np.concatenate([feats_per_image[i] for i in train_ids])
        ys = np.concatenate([labels_per_image[i] for i in train_ids])
        model = fit_logreg(xs[ys >= 0], ys[ys >= 0], c_value=1.0,
                           max_iter=cfg["probe"]["max_iter"])
        for iid in test_ids:
            raster = dense_predict_map(feats_per_image[iid], model, grids[iid], stride)
            raster_store.add_label_map(iid, "predicted", raster)
            truth = store.load_label_map(iid, "phenotype")
            mask = truth >= 0
            if mask.any():
                accuracies.append(float((raster[mask] == truth[mask]).mean()))
    raster_store.write_manifest()
    payload = {"pixel_accuracy_on_labeled": {"mean": float(np.mean(accuracies)),
                                             "std": float(np.std(accuracies))},
               "n_images": len(ids)}
    save_report(out / "densemap_report.json", payload)
    echo_config(cfg, out)
    logger.info("dense map labeled-pixel accuracy %.4f", payload["pixel_accuracy_on_labeled"]["mean"])
    return 0


# -- cluster -------------------------------------------------------------------

def cmd_cluster(args) -> int:
    cfg = load_config(args.config, {"seed": args.seed} if args.seed is not None else None)
    out = _out_dir(args)
    emb = EmbeddingStore.load(args.embeddings)
    if emb.case_ids is None:
        raise ValueError("embeddings need case ids for clustering analysis")
    by_case: dict[str, list[int]] = {}
    for i, cid in enumerate(emb.case_ids):
        by_case.setdefault(cid, []).append(i)
    feats = emb.vectors.astype(np.float64)
    case_feats = {cid: feats[rows] for cid, rows in by_case.items()}
    dists, model = case_cluster_features(case_feats, args.k, seed=cfg["seed"])

    case_labels = _case_labels(emb, by_case, args.case_labels)
    cases = sorted(dists)
    matrix = np.stack([dists[c] for c in cases])
    labels = np.array([case_labels[c] for c in cases])

    payload: dict = {
        "k": args.k,
        "cases": cases,
        "distributions": {c: dists[c].tolist() for c in cases},
        "case_labels": {c: int(case_labels[c]) for c in cases},
    }
    if len(np.unique(labels)) >= 2:
        n_support = min(args.n_support, min(np.bincount(labels)) - 1)
        if n_support >= 1:
            accs = case_knn_eval(matrix, labels, n_support=n_support,
                                 trials=args.trials, seed=cfg["seed"])
            payload["knn"] = {"n_support": n_support, "trials": args.trials,
                              "accuracy_mean": float(np.mean(accs)),
                              "accuracy_std": float(np.std(accs))}
        pca = pca_fit(matrix, min(2, matrix.shape[1]))
        payload["pca2"] = {c: pca.transform(matrix[i:i + 1])[0].tolist()
                           for i, c in enumerate(cases)}
        groups = np.unique(labels)
        tests = {}
        for cluster in range(args.k):
            a = matrix[labels == groups[0], cluster]
            b = matrix[labels == groups[1], cluster]
            u, p = mann_whitney_u(a, b)
            tests[str(cluster)] = {"u": u, "p": p}
        payload["mann_whitney"] = tests
    save_report(out / "cluster_report.json", payload)
    echo_config(cfg, out)
    return 0


def _case_labels(emb: EmbeddingStore, by_case: dict, path: str | None) -> dict:
    if path:
        return {k: int(v) for k, v in json.loads(Path(path).read_text()).items()}
    # default: binary grouping from the condition tag (low vs high gain levels)
    labels = {}
    for cid, rows in by_case.items():
        tag = emb.condition_tags[rows[0]] if emb.condition_tags else None
        if tag is None:
            labels[cid] = 0
        else:
            level = int("".join(ch for ch in tag if ch.isdigit()) or 0)
            labels[cid] = int(level >= 2)
    return labels


# -- stratify ------------------------------------------------------------------

def cmd_stratify(args) -> int:
    cfg = load_config(args.config, {"seed": args.seed} if args.seed is not None else None)
    out = _out_dir(args)
    emb = EmbeddingStore.load(args.embeddings)
    if emb.case_ids is None:
        raise ValueError("embeddings need case ids for stratification")
    by_case: dict[str, list[int]] = {}
    for i, cid in enumerate(emb.case_ids):
        by_case.setdefault(cid, []).append(i)
    case_labels = _case_labels(emb, by_case, args.case_labels)
    cases = sorted(by_case)
    labels = np.array([case_labels[c] for c in cases])
    if len(np.unique(labels)) < 2:
        raise ValueError("stratification needs two case groups")
    feats = emb.vectors.astype(np.float64)
    block_dim = args.block_dim or feats.shape[1]
    pca_dim = args.pca_dim

    rng = np.random.default_rng(cfg["seed"])
    metrics = {"balanced_accuracy": [], "auroc": []}
    for _ in range(args.trials):
        test_cases = []
        for g in np.unique(labels):
            members = np.flatnonzero(labels == g)
            n_test = max(1, int(round(0.2 * len(members))))
            test_cases.extend(members[rng.choice(len(members), n_test, replace=False)])
        test_mask = np.zeros(len(cases), dtype=bool)
        test_mask[test_cases] = True
        train_rows = np.concatenate([by_case[cases[i]] for i in np.flatnonzero(~test_mask)])
        block_pca = fit_block_pca(feats[train_rows], block_dim, pca_dim)
        case_vecs = np.stack([
            mil_case_embed(feats[by_case[c]], block_pca, block_dim) for c in cases])
        model = fit_logreg(case_vecs[~test_mask], labels[~test_mask], c_value=1.0,
                           max_iter=cfg["probe"]["max_iter"])
        rep = classify_metrics(labels[test_mask], model.predict(case_vecs[test_mask]),
                               model.scores(case_vecs[test_mask]))
        metrics["balanced_accuracy"].append(rep.balanced_accuracy)
        metrics["auroc"].append(rep.auroc_ovo_macro)
    payload = {
        "pca_dim": pca_dim, "block_dim": block_dim, "trials": args.trials,
        "balanced_accuracy": {"mean": float(np.mean(metrics["balanced_accuracy"])),
                              "std": float(np.std(metrics["balanced_accuracy"]))},
        "auroc": {"mean": float(np.nanmean(metrics["auroc"])),
                  "std": float(np.nanstd(metrics["auroc"]))},
    }
    save_report(out / "stratify_report.json", payload)
    echo_config(cfg, out)
    logger.info("stratification AUROC %.4f over %d splits", payload["auroc"]["mean"], args.trials)
    return 0


# -- retrieve ------------------------------------------------------------------

def cmd_retrieve(args) -> int:
    cfg = load_config(args.config, {"seed": args.seed} if args.seed is not None else None)
    out = _out_dir(args)
    ks = [int(k) for k in args.k.split(",")]
    query = EmbeddingStore.load(args.query_embeddings)
    ref = EmbeddingStore.load(args.index_embeddings) if args.index_embeddings else query
    self_reference = args.index_embeddings is None
    payload: dict = {"unit": args.unit, "k": ks, "n_query": len(query), "n_index": len(ref)}

    if args.unit == "case":
        by_case: dict[str, list[int]] = {}
        for i, cid in enumerate(query.case_ids):
            by_case.setdefault(cid, []).append(i)
        case_labels = _case_labels(query, by_case, args.case_labels)
        cases = sorted(by_case)
        vecs = np.stack([case_embed(query.vectors[by_case[c]]) for c in cases])
        labels = np.array([case_labels[c] for c in cases])
        accs = case_retrieval_eval(vecs, labels, n_support=args.n_support,
                                   trials=args.trials, seed=cfg["seed"])
        payload["case_top1"] = {"mean": float(np.mean(accs)), "std": float(np.std(accs))}
    else:
        index = EmbeddingIndex(ref)
        if args.unit == "cell":
            labels = np.asarray(query.labels)
            keep = np.flatnonzero(labels >= 0)
            acc = {}
            for k in ks:
                acc[str(k)] = accuracy_at_k(
                    query.vectors[keep], labels[keep], index, k,
                    exclude_ids=[query.ids[i] for i in keep] if self_reference else None)
            payload["accuracy_at_k"] = acc
        else:
            dists = query.extra.get("phenotype_dists")
            ref_dists = ref.extra.get("phenotype_dists")
            if dists is None or ref_dists is None:
                raise ValueError("patch retrieval needs phenotype distributions in both stores")
            rmse: dict[str, list[float]] = {str(k): [] for k in ks}
            for i in range(len(query)):
                if dists[i] is None:
                    continue
                exclude = query.ids[i] if self_reference else None
                result = index.query_topk(query.vectors[i], max(ks), exclude_id=exclude)
                cand = [ref_dists[j] for j in result.indices if ref_dists[j] is not None]
                for k in ks:
                    top = cand[:k]
                    if top:
                        rmse[str(k)].append(phenotype_rmse(dists[i], top))
            payload["min_rmse_at_k"] = {k: {"mean": float(np.mean(v)), "std": float(np.std(v))}
                                        for k, v in rmse.items() if v}
    save_report(out / "retrieve_report.json", payload)
    echo_config(cfg, out)
    return 0


# -- batchfx -------------------------------------------------------------------

def cmd_batchfx(args) -> int:
    cfg = load_config(args.config, {"seed": args.seed} if args.seed is not None else None)
    out = _out_dir(args)
    emb = EmbeddingStore.load(args.embeddings)
    if not emb.condition_tags or all(t is None for t in emb.condition_tags):
        raise ValueError("embeddings carry no condition tags")
    report = batch_effect_score(emb.vectors.astype(np.float64), emb.condition_tags)
    save_report(out / "batchfx_report.json", report.to_dict())
    echo_config(cfg, out)
    logger.info("batch-effect silhouette %.4f +/- %.4f over %d pairs",
                report.mean, report.std, len(report.pair_scores))
    return 0


# -- attn ----------------------------------------------------------------------

def cmd_attn(args) -> int:
    cfg = load_config(args.config, {"seed": args.seed} if args.seed is not None else None)
    out = _out_dir(args)
    store = MpxStore.open(args.store)
    stats = compute_norm_stats(store)
    encoder = _load_encoder_arg(args, cfg["encoder"])
    size = args.patch_size or cfg["patch"]["size"]
    records = _patch_records(store, size, args.patch_stride or size)
    _, scores = embed_patches(store, encoder, stats, records, readout_mode="cls",
                              batch_size=args.batch_size, keep_attention=True)
    z = attention_zscores(scores)
    names = [store.panel.name_of(r) for r in
             store.image_meta(records[0].image_id)["panel_refs"]]
    lines = ["patch_id," + ",".join(f"score_{n}" for n in names) + ","
             + ",".join(f"z_{n}" for n in names)]
    for i, rec in enumerate(records):
        lines.append(rec.patch_id + ","
                     + ",".join(f"{v:.6f}" for v in scores[i]) + ","
                     + ",".join(f"{v:.6f}" for v in z[i]))
    (out / "attention_scores.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    echo_config(cfg, out)
    logger.info("wrote attention scores for %d patches", len(records))
    return 0


# -- serve ---------------------------------------------------------------------

def cmd_serve(args) -> int:
    import uvicorn

    from ..service.app import Service, create_app

    service = Service(checkpoint=args.checkpoint)
    for spec in args.dataset or []:
        name, _, path = spec.partition("=")
        if not path:
            raise ValueError(f"--dataset wants name=storepath, got {spec!r}")
        service.load_dataset(name, path, patch_size=args.patch_size)
        if args.index:
            service.build_index(name, readout=args.readout)
    app = create_app(service=service)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# -- report --------------------------------------------------------------------

def cmd_report(args) -> int:
    out = _out_dir(args)
    rows = []
    per_class_rows = []
    for path in args.inputs:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        name = Path(path).stem
        if "folds" in payload:
            for i, fold in enumerate(payload["folds"]):
                rows.append((name, f"fold{i}", fold["balanced_accuracy"], fold["macro_f1"],
                             fold["macro_average_precision"], fold["auroc_ovo_macro"]))
                for cls, prec in fold.get("per_class_precision", {}).items():
                    per_class_rows.append((name, f"fold{i}", cls, prec))
        if "aggregate" in payload:
            agg = payload["aggregate"]
            rows.append((name, "mean", agg["balanced_accuracy"]["mean"], agg["macro_f1"]["mean"],
                         agg["macro_average_precision"]["mean"], agg["auroc_ovo_macro"]["mean"]))
            rows.append((name, "std", agg["balanced_accuracy"]["std"], agg["macro_f1"]["std"],
                         agg["macro_average_precision"]["std"], agg["auroc_ovo_macro"]["std"]))
    lines = ["source,row,balanced_accuracy,macro_f1,macro_average_precision,auroc_ovo_macro"]
    lines += [",".join(str(v) for v in row) for row in rows]
    (out / "metrics.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if per_class_rows:
        lines = ["source,fold,class,precision"]
        lines += [",".join(str(v) for v in row) for row in per_class_rows]
        (out / "per_class_precision.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info("wrote %s", out / "metrics.csv")
    return 0
