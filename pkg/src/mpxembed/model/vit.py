"""Marker-agnostic vision transformer over multiplexed images.

Every marker channel is tokenized separately and embedded with one shared
linear projection; tokens are tagged with a fixed sinusoidal marker
encoding plus a learnable spatial position shared across markers, then
contextualized jointly by a pre-norm transformer. The same weights handle
any number, identity, and order of markers.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..autograd import tensor as ag
from ..autograd.tensor import Tensor
from .markers import marker_encoding_matrix
from .positions import bilinear_weights


@dataclass
class EncoderConfig:
    dim: int = 64
    token_size: int = 8
    token_stride: int = 8
    layers: int = 4
    heads: int = 4
    registers: int = 4
    mlp_ratio: float = 4.0
    drop_path: float = 0.0
    pos_grid: int = 8            # tokens per axis the position table is trained at

    def __post_init__(self):
        if self.dim % 2:
            raise ValueError(f"dim must be even, got {self.dim}")
        if self.dim % self.heads:
            raise ValueError(f"dim {self.dim} not divisible by heads {self.heads}")
        if self.token_stride > self.token_size:
            raise ValueError(f"token_stride {self.token_stride} exceeds token_size {self.token_size}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderConfig":
        return cls(**d)


@dataclass
class EncoderOutput:
    """Contextualized readouts for one batch of patches."""

    cls: Tensor                      # (B, D)
    tokens: Tensor                   # (B, M, N, D), input marker order
    grid: tuple[int, int]            # token grid (nh, nw)
    marker_ids: np.ndarray           # (M,) global marker indices
    attn: np.ndarray | None = None   # (layers, B, heads, S) CLS attention rows
    n_registers: int = 0

    def cls_features(self) -> np.ndarray:
        return self.cls.data.copy()

    def marker_features(self) -> np.ndarray:
        """Spatial mean per marker, concatenated in input marker order: (B, M*D)."""
        b, m, n, d = self.tokens.shape
        return self.tokens.data.mean(axis=2).reshape(b, m * d)

    def token_features(self) -> np.ndarray:
        """Per-location concatenation across markers: (B, N, M*D)."""
        b, m, n, d = self.tokens.shape
        return np.ascontiguousarray(self.tokens.data.transpose(0, 2, 1, 3)).reshape(b, n, m * d)

    def marker_features_tensor(self) -> Tensor:
        b, m, n, d = self.tokens.shape
        return ag.reshape(ag.mean(self.tokens, axis=2), (b, m * d))


class Encoder:
    """Parameter container plus the batched forward pass."""

    def __init__(self, config: EncoderConfig, params: dict[str, Tensor]):
        self.config = config
        self.params = params

    # -- construction ---------------------------------------------------
    @classmethod
    def init(cls, config: EncoderConfig, rng: np.random.Generator,
             dtype=None) -> "Encoder":
        dt = dtype or ag.get_default_dtype()
        c = config
        hidden = int(c.dim * c.mlp_ratio)

        def w(*shape, std=0.02):
            return Tensor(rng.normal(0.0, std, shape).astype(dt), requires_grad=True, dtype=dt)

        def zeros(*shape):
            return Tensor(np.zeros(shape, dtype=dt), requires_grad=True, dtype=dt)

        def ones(*shape):
            return Tensor(np.ones(shape, dtype=dt), requires_grad=True, dtype=dt)

        p: dict[str, Tensor] = {
            "embed.w": w(c.token_size * c.token_size, c.dim),
            "embed.b": zeros(c.dim),
            "pos.grid": w(c.pos_grid * c.pos_grid, c.dim),
            "pos.cls": w(c.dim),
            "cls": w(c.dim),
            "mask_token": w(c.dim),
        }
        if c.registers:
            p["registers"] = w(c.registers, c.dim)
        for i in range(c.layers):
            pre = f"blocks.{i}"
            p[f"{pre}.ln1.g"] = ones(c.dim)
            p[f"{pre}.ln1.b"] = zeros(c.dim)
            p[f"{pre}.attn.wqkv"] = w(c.dim, 3 * c.dim)
            p[f"{pre}.attn.bqkv"] = zeros(3 * c.dim)
            p[f"{pre}.attn.wproj"] = w(c.dim, c.dim)
            p[f"{pre}.attn.bproj"] = zeros(c.dim)
            p[f"{pre}.ln2.g"] = ones(c.dim)
            p[f"{pre}.ln2.b"] = zeros(c.dim)
            p[f"{pre}.mlp.w1"] = w(c.dim, hidden)
            p[f"{pre}.mlp.b1"] = zeros(hidden)
            p[f"{pre}.mlp.w2"] = w(hidden, c.dim)
            p[f"{pre}.mlp.b2"] = zeros(c.dim)
        p["final_ln.g"] = ones(c.dim)
        p["final_ln.b"] = zeros(c.dim)
        return cls(config, p)

    def set_requires_grad(self, flag: bool) -> None:
        for p in self.params.values():
            p.requires_grad = flag
            if not flag:
                p.grad = None

    # -- forward ----------------------------------------------------------
    def _linear(self, x: Tensor, wname: str, bname: str) -> Tensor:
        w = self.params[wname]
        shape = x.shape
        flat = ag.reshape(x, (-1, shape[-1])) if x.ndim != 2 else x
        out = ag.add(ag.matmul(flat, w), self.params[bname])
        if x.ndim != 2:
            out = ag.reshape(out, shape[:-1] + (w.shape[1],))
        return out

    def _drop_path(self, x: Tensor, training: bool, rng) -> Tensor:
        rate = self.config.drop_path
        if not training or rate <= 0.0:
            return x
        if rng is None:
            raise ValueError("drop_path > 0 during training requires an rng")
        keep = (rng.random(x.shape[0]) >= rate).astype(x.data.dtype) / (1.0 - rate)
        return ag.mul(x, Tensor(keep.reshape(-1, *([1] * (x.ndim - 1)))))

    def encode(self, pixels: np.ndarray, marker_ids, *, mask: np.ndarray | None = None,
               keep_attention: bool = False, training: bool = False,
               rng: np.random.Generator | None = None,
               final_norm: bool = True) -> EncoderOutput:
        """Run the transformer over a batch of normalized patches.

        pixels: (B, M, H, W); marker_ids: (M,) global indices shared across
        the batch, or (B, M) per-sample; mask: (B, N) boolean over token
        locations (True = replace the token embedding with the learned mask
        token across all markers).
        """
        c = self.config
        dt = self.params["cls"].dtype
        pixels = np.asarray(pixels, dtype=dt)
        b, m, h, w_ = pixels.shape
        marker_ids = np.asarray(marker_ids, dtype=np.int64)
        if marker_ids.ndim not in (1, 2) or marker_ids.shape[-1] != m:
            raise ValueError(f"marker_ids shape {marker_ids.shape} does not match {m} channels")

        x = Tensor(pixels.reshape(b * m, h, w_), dtype=dt)
        toks = ag.unfold_tokens(x, c.token_size, c.token_stride)    # (B*M, N, P*P)
        nh = (h - c.token_size) // c.token_stride + 1
        nw = (w_ - c.token_size) // c.token_stride + 1
        n = nh * nw
        emb = self._linear(toks, "embed.w", "embed.b")              # (B*M, N, D)
        emb = ag.reshape(emb, (b, m, n, c.dim))

        if mask is not None:
            mask = np.asarray(mask, dtype=dt).reshape(b, 1, n, 1)
            keep = Tensor(1.0 - mask, dtype=dt)
            emb = ag.add(ag.mul(emb, keep),
                         ag.mul(ag.reshape(self.params["mask_token"], (1, 1, 1, c.dim)),
                                Tensor(mask, dtype=dt)))

        menc = marker_encoding_matrix(marker_ids, c.dim).astype(dt)
        if marker_ids.ndim == 1:
            menc = menc.reshape(1, m, 1, c.dim)
        else:
            menc = menc.reshape(b, m, 1, c.dim)
        emb = ag.add(emb, Tensor(menc, dtype=dt))

        if nh != nw:
            raise ValueError(f"token grid must be square, got {nh}x{nw}")
        if nh == c.pos_grid:
            pos = self.params["pos.grid"]
        else:
            wint = Tensor(bilinear_weights(c.pos_grid, nh).astype(dt), dtype=dt)
            pos = ag.matmul(wint, self.params["pos.grid"])
        emb = ag.add(emb, ag.reshape(pos, (1, 1, n, c.dim)))

        seq_parts = []
        ones_b = Tensor(np.ones((b, 1, 1), dtype=dt), dtype=dt)
        cls_tok = ag.add(self.params["cls"], self.params["pos.cls"])
        seq_parts.append(ag.mul(ones_b, ag.reshape(cls_tok, (1, 1, c.dim))))
        if c.registers:
            seq_parts.append(ag.mul(ones_b, ag.reshape(self.params["registers"],
                                                       (1, c.registers, c.dim))))
        seq_parts.append(ag.reshape(emb, (b, m * n, c.dim)))
        seq = ag.concat(seq_parts, axis=1)                          # (B, S, D)
        s = seq.shape[1]

        head_dim = c.dim // c.heads
        scale = 1.0 / np.sqrt(head_dim)
        attn_rows = [] if keep_attention else None

        for i in range(c.layers):
            pre = f"blocks.{i}"
            hnorm = ag.add(ag.mul(ag.layer_norm(seq), self.params[f"{pre}.ln1.g"]),
                           self.params[f"{pre}.ln1.b"])
            qkv = self._linear(hnorm, f"{pre}.attn.wqkv", f"{pre}.attn.bqkv")
            qkv = ag.reshape(qkv, (b, s, 3, c.heads, head_dim))
            qkv = ag.transpose(qkv, (2, 0, 3, 1, 4))                # (3, B, heads, S, dh)
            q, k, v = qkv[0], qkv[1], qkv[2]
            scores = ag.mul(ag.matmul(q, ag.transpose(k, (0, 1, 3, 2))), scale)
            probs = ag.softmax(scores)                              # (B, heads, S, S)
            if attn_rows is not None:
                attn_rows.append(probs.data[:, :, 0, :].copy())
            ctx = ag.matmul(probs, v)                               # (B, heads, S, dh)
            ctx = ag.reshape(ag.transpose(ctx, (0, 2, 1, 3)), (b, s, c.dim))
            ctx = self._linear(ctx, f"{pre}.attn.wproj", f"{pre}.attn.bproj")
            seq = ag.add(seq, self._drop_path(ctx, training, rng))

            hnorm = ag.add(ag.mul(ag.layer_norm(seq), self.params[f"{pre}.ln2.g"]),
                           self.params[f"{pre}.ln2.b"])
            mid = ag.gelu(self._linear(hnorm, f"{pre}.mlp.w1", f"{pre}.mlp.b1"))
            out = self._linear(mid, f"{pre}.mlp.w2", f"{pre}.mlp.b2")
            seq = ag.add(seq, self._drop_path(out, training, rng))

        if final_norm:
            seq = ag.add(ag.mul(ag.layer_norm(seq), self.params["final_ln.g"]),
                         self.params["final_ln.b"])

        cls = seq[:, 0]
        tokens = ag.reshape(seq[:, 1 + c.registers:], (b, m, n, c.dim))
        attn = np.stack(attn_rows) if attn_rows else None
        return EncoderOutput(cls=cls, tokens=tokens, grid=(nh, nw),
                             marker_ids=marker_ids, attn=attn,
                             n_registers=c.registers)


def readout(output: EncoderOutput, mode: str) -> np.ndarray:
    """One of the three feature readouts: cls, marker, or token."""
    if mode == "cls":
        return output.cls_features()
    if mode == "marker":
        return output.marker_features()
    if mode == "token":
        return output.token_features()
    raise ValueError(f"unknown readout mode {mode!r}; expected cls|marker|token")


def cls_attention_by_marker(output: EncoderOutput, layer: int = -1, head: int = 0) -> np.ndarray:
    """Per-marker CLS attention mass, renormalized over marker tokens only.

    Returns (B, M) scores summing to 1 per row; CLS->CLS and CLS->register
    attention is excluded from the denominator.
    """
    if output.attn is None:
        raise ValueError("attention rows were not retained; encode with keep_attention=True")
    rows = output.attn[layer][:, head, :]            # (B, S)
    skip = 1 + output.n_registers
    m = output.tokens.shape[1]
    n = output.tokens.shape[2]
    marker_mass = rows[:, skip:].reshape(-1, m, n).sum(axis=2)
    total = marker_mass.sum(axis=1, keepdims=True)
    return marker_mass / total


def attention_zscores(scores: np.ndarray) -> np.ndarray:
    """Standardize per-marker attention scores across a population of patches."""
    mu = scores.mean(axis=0, keepdims=True)
    sd = scores.std(axis=0, keepdims=True)
    return (scores - mu) / np.maximum(sd, 1e-12)
