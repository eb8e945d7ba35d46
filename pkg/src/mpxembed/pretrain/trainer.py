"""Student-teacher pretraining loop.

One thread owns the student parameters and optimizer; the teacher is an
EMA mirror updated after every step and is the model that gets
checkpointed. View construction is reproducible for any worker count
because every random draw comes from a stream keyed on (seed, step, slot).
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..autograd import tensor as ag
from ..autograd.optim import AdamW, clip_grad_norm
from ..autograd.tensor import Tensor
from ..data.normalize import NormalizationStats, compute_norm_stats
from ..data.patching import augment_view, patch_pixels, select_channels, tessellate
from ..data.sampling import stratified_sample
from ..model.checkpoint import save_checkpoint
from ..model.vit import Encoder, EncoderConfig
from .config import PretrainConfig, schedule_value
from .losses import CenteredDistillationLoss, MaskedTokenLoss, ProjectionHead, ema_update
from .masking import block_mask
from .views import draw_sides

logger = logging.getLogger(__name__)


@dataclass
class ViewGroup:
    """Views of equal spatial extent stacked for one encoder call."""

    pixels: np.ndarray                 # (G, 3, side, side)
    marker_ids: np.ndarray             # (G, 3)
    slots: list[int]                   # view slot per row
    rows_by_slot: dict[int, list[int]]
    mask: np.ndarray | None = None     # (G, n_tokens) bool, global groups only


@dataclass
class PreparedBatch:
    global_groups: list[ViewGroup]
    local_group: ViewGroup | None
    batch_size: int


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)))


class Pretrainer:
    def __init__(self, store, encoder_config: EncoderConfig, config: PretrainConfig,
                 stats: NormalizationStats | None = None, workers: int = 1):
        self.store = store
        self.enc_cfg = encoder_config
        self.cfg = config
        self.workers = max(1, workers)
        self.stats = stats or compute_norm_stats(store)

        self._cache: dict[str, tuple[np.ndarray, list[int]]] = {}
        groups: dict[str, list] = {}
        for iid in store.image_ids:
            meta = store.image_meta(iid)
            m, h, w = meta["shape"]
            for rec in tessellate(h, w, config.patch_size, config.patch_stride, image_id=iid,
                                  subset_tag=meta["subset_tag"]):
                groups.setdefault(meta["subset_tag"], []).append(rec)
        if not any(groups.values()):
            raise ValueError("store yields no pretraining patches")
        self.patch_groups = groups

        init_rng = _stream(config.seed, 0)
        self.student = Encoder.init(encoder_config, init_rng)
        self.head = ProjectionHead.init(encoder_config.dim, config.head_hidden,
                                        config.head_bottleneck, config.prototypes, init_rng)
        self.params: dict[str, Tensor] = {**self.student.params, **self.head.params}

        self.teacher_arrays = {k: p.data.copy() for k, p in self.params.items()}
        t_tensors = {k: Tensor(v, dtype=v.dtype) for k, v in self.teacher_arrays.items()}
        for t, src in zip(t_tensors.values(), self.teacher_arrays.values()):
            t.data = src  # share storage so EMA updates are visible
        self.teacher = Encoder(encoder_config,
                               {k: t_tensors[k] for k in self.student.params})
        self.teacher_head = ProjectionHead({k: t_tensors[k] for k in self.head.params})

        self.optimizer = AdamW(self.params, betas=config.adamw_betas)
        self.dino_loss = CenteredDistillationLoss(config.prototypes, config.center_momentum)
        self.mim_loss = MaskedTokenLoss(config.prototypes, config.center_momentum)
        self.step = 0

    # -- data -------------------------------------------------------------
    def _normalized(self, image_id: str) -> tuple[np.ndarray, list[int]]:
        if image_id not in self._cache:
            image = self.store.load_image(image_id)
            self._cache[image_id] = (self.stats.apply_image(image), list(image.panel_refs))
        return self._cache[image_id]

    def _build_slot(self, step: int, slot: int, rec, global_sides, local_side):
        """(view_slot, pixels, marker_refs, mask) tuples for one batch slot."""
        cfg = self.cfg
        rng = _stream(cfg.seed, 1, step, slot)
        channels, refs = self._normalized(rec.image_id)
        patch = patch_pixels(channels, rec)
        nuclear_ref = self.store.panel.nuclear_global_index
        patch3, refs3 = select_channels(patch, refs, nuclear_ref, rng)
        out = []
        stride = self.enc_cfg.token_stride
        for g, side in enumerate(global_sides):
            pix = augment_view(patch3, side, rng)
            grid = (side - self.enc_cfg.token_size) // stride + 1
            mask = block_mask(grid, grid, cfg.mask_ratio, rng)
            out.append((g, pix, refs3, mask))
        for k in range(cfg.local_crops):
            pix = augment_view(patch3, local_side, rng)
            out.append((cfg.global_crops + k, pix, refs3, None))
        return out

    def prepare_batch(self, step: int) -> PreparedBatch:
        cfg = self.cfg
        sides_rng = _stream(cfg.seed, 2, step)
        global_sides, local_side = draw_sides(cfg.patch_size, cfg, self.enc_cfg.token_stride,
                                              self.enc_cfg.token_size, sides_rng)
        sample_rng = _stream(cfg.seed, 3, step)
        recs = [stratified_sample(self.patch_groups, sample_rng) for _ in range(cfg.batch_size)]

        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                slot_views = list(pool.map(
                    lambda args: self._build_slot(step, args[0], args[1], global_sides, local_side),
                    enumerate(recs)))
        else:
            slot_views = [self._build_slot(step, b, rec, global_sides, local_side)
                          for b, rec in enumerate(recs)]

        # group global views by side so equal extents share one encoder call
        global_groups: list[ViewGroup] = []
        for side in sorted(set(global_sides)):
            pixels, ids, slots, masks = [], [], [], []
            rows_by_slot: dict[int, list[int]] = {}
            for g, gside in enumerate(global_sides):
                if gside != side:
                    continue
                for b, views in enumerate(slot_views):
                    vslot, pix, refs3, mask = views[g]
                    rows_by_slot.setdefault(vslot, []).append(len(pixels))
                    pixels.append(pix)
                    ids.append(refs3)
                    slots.append(vslot)
                    masks.append(mask)
            global_groups.append(ViewGroup(
                pixels=np.stack(pixels), marker_ids=np.asarray(ids), slots=slots,
                rows_by_slot=rows_by_slot, mask=np.stack(masks)))

        local_group = None
        if cfg.local_crops:
            pixels, ids, slots = [], [], []
            rows_by_slot = {}
            for k in range(cfg.local_crops):
                vslot = cfg.global_crops + k
                for b, views in enumerate(slot_views):
                    _, pix, refs3, _ = views[cfg.global_crops + k]
                    rows_by_slot.setdefault(vslot, []).append(len(pixels))
                    pixels.append(pix)
                    ids.append(refs3)
                    slots.append(vslot)
            local_group = ViewGroup(pixels=np.stack(pixels), marker_ids=np.asarray(ids),
                                    slots=slots, rows_by_slot=rows_by_slot)
        return PreparedBatch(global_groups=global_groups, local_group=local_group,
                             batch_size=cfg.batch_size)

    # -- loss -------------------------------------------------------------
    def compute_losses(self, batch: PreparedBatch, teacher_temp: float,
                       update_centers: bool = True):
        """Total loss tensor plus the two component values."""
        cfg = self.cfg
        n_slots = cfg.global_crops + cfg.local_crops
        student_by_slot: list[Tensor | None] = [None] * n_slots
        teacher_by_slot: list[np.ndarray | None] = [None] * cfg.global_crops
        student_tok_logits = []
        teacher_tok_logits = []

        for group in batch.global_groups:
            with ag.no_grad():
                t_out = self.teacher.encode(group.pixels, group.marker_ids)
                t_cls_logits = self.teacher_head.forward(t_out.cls).data
            s_out = self.student.encode(group.pixels, group.marker_ids, mask=group.mask)
            s_cls_logits = self.head.forward(s_out.cls)
            for vslot, rows in group.rows_by_slot.items():
                teacher_by_slot[vslot] = t_cls_logits[rows]
                student_by_slot[vslot] = s_cls_logits[rows]

            b_idx, n_idx = np.nonzero(group.mask)
            if b_idx.size:
                m = group.marker_ids.shape[1]
                d = self.enc_cfg.dim
                t_tok = t_out.tokens.data[b_idx, :, n_idx, :].reshape(-1, d)
                s_tok = ag.reshape(ag.slice_(s_out.tokens, (b_idx, slice(None), n_idx)),
                                   (b_idx.size * m, d))
                teacher_tok_logits.append(self.teacher_head.forward(Tensor(t_tok)).data)
                student_tok_logits.append(self.head.forward(s_tok))

        if batch.local_group is not None:
            group = batch.local_group
            l_out = self.student.encode(group.pixels, group.marker_ids)
            l_logits = self.head.forward(l_out.cls)
            for vslot, rows in group.rows_by_slot.items():
                student_by_slot[vslot] = ag.slice_(l_logits, (np.asarray(rows),))

        dino = self.dino_loss([s for s in student_by_slot if s is not None],
                              [t for t in teacher_by_slot if t is not None],
                              cfg.student_temp, teacher_temp, update_center=update_centers)
        if student_tok_logits:
            s_all = student_tok_logits[0] if len(student_tok_logits) == 1 else ag.concat(student_tok_logits, axis=0)
            t_all = np.concatenate(teacher_tok_logits, axis=0)
        else:
            s_all, t_all = None, None
        mim = self.mim_loss(s_all, t_all, cfg.student_temp, teacher_temp,
                            update_center=update_centers)
        total = ag.add(dino, mim)
        return total, float(dino.data), float(mim.data)

    # -- optimization -------------------------------------------------------
    def train_step(self, step: int | None = None) -> dict:
        t = self.step if step is None else step
        batch = self.prepare_batch(t)
        return self.train_step_prepared(batch, t)

    def train_step_prepared(self, batch: PreparedBatch, t: int) -> dict:
        cfg = self.cfg
        teacher_temp = schedule_value("teacher_temp", t, cfg)
        lr = schedule_value("lr", t, cfg)
        wd = schedule_value("weight_decay", t, cfg)
        momentum = schedule_value("teacher_momentum", t, cfg)

        total, dino_val, mim_val = self.compute_losses(batch, teacher_temp)
        if not np.isfinite(total.data):
            raise FloatingPointError(
                f"non-finite loss at step {t}: dino={dino_val}, mim={mim_val}")
        self.optimizer.zero_grad()
        total.backward()
        if t < cfg.freeze_last_layer_steps and self.head.params["head.proto"].grad is not None:
            self.head.params["head.proto"].grad[:] = 0.0
        grad_norm = clip_grad_norm(self.params, cfg.grad_clip)
        self.optimizer.step(lr, wd)
        ema_update(self.teacher_arrays, self.params, momentum)
        self.step = t + 1
        return {"step": t, "dino_loss": dino_val, "mim_loss": mim_val,
                "total_loss": dino_val + mim_val, "lr": lr, "momentum": momentum,
                "weight_decay": wd, "grad_norm": grad_norm}

    # -- loop ---------------------------------------------------------------
    def run(self, run_dir, total_steps: int | None = None, log_every: int = 50,
            checkpoint_every: int | None = None) -> list[dict]:
        cfg = self.cfg
        total = total_steps or cfg.total_steps
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        (run_dir / "pretrain_config.json").write_text(
            json.dumps({"pretrain": cfg.to_dict(), "encoder": self.enc_cfg.to_dict()},
                       indent=1, sort_keys=True) + "\n", encoding="utf-8")
        self.stats.save(run_dir / "norm_stats.json")

        history = []
        log_path = run_dir / "loss_log.csv"
        with open(log_path, "w", encoding="utf-8") as log:
            log.write("step,dino_loss,mim_loss,lr,momentum\n")
            for t in range(total):
                metrics = self.train_step(t)
                history.append(metrics)
                log.write(f"{t},{metrics['dino_loss']:.6f},{metrics['mim_loss']:.6f},"
                          f"{metrics['lr']:.8f},{metrics['momentum']:.8f}\n")
                if log_every and (t + 1) % log_every == 0:
                    logger.info("step %d dino %.4f mim %.4f lr %.5f", t,
                                metrics["dino_loss"], metrics["mim_loss"], metrics["lr"])
                if checkpoint_every and (t + 1) % checkpoint_every == 0:
                    self.save(run_dir / f"checkpoint_{t + 1:06d}.ckpt")
        self.save(run_dir / "checkpoint_final.ckpt")
        return history

    def save(self, path) -> None:
        """Checkpoint the teacher encoder (the published model)."""
        enc_arrays = {k: self.teacher_arrays[k] for k in self.student.params}
        save_checkpoint(path, self.enc_cfg, enc_arrays, extra={"step": self.step})
