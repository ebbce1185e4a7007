"""Pre-norm transformer building blocks shared by the vision encoders and the
caption decoder."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numcore as nc
from .numcore import Param, Tensor

INIT_SCALE = 0.02


@dataclass
class BlockWeights:
    """One pre-norm block: self-attention followed by a GELU feed-forward."""

    ln1_g: Param
    ln1_b: Param
    qkv_w: Param
    qkv_b: Param
    proj_w: Param
    proj_b: Param
    ln2_g: Param
    ln2_b: Param
    ffn1_w: Param
    ffn1_b: Param
    ffn2_w: Param
    ffn2_b: Param

    def params(self) -> list[Param]:
        return [
            self.ln1_g, self.ln1_b, self.qkv_w, self.qkv_b, self.proj_w, self.proj_b,
            self.ln2_g, self.ln2_b, self.ffn1_w, self.ffn1_b, self.ffn2_w, self.ffn2_b,
        ]


def init_block(prefix: str, dim: int, ffn_mult: int, rng: np.random.Generator) -> BlockWeights:
    hidden = ffn_mult * dim
    return BlockWeights(
        ln1_g=Param(f"{prefix}.ln1.g", np.ones(dim)),
        ln1_b=Param(f"{prefix}.ln1.b", np.zeros(dim)),
        qkv_w=Param(f"{prefix}.attn.qkv.w", rng.normal(0.0, INIT_SCALE, (dim, 3 * dim))),
        qkv_b=Param(f"{prefix}.attn.qkv.b", np.zeros(3 * dim)),
        proj_w=Param(f"{prefix}.attn.proj.w", rng.normal(0.0, INIT_SCALE, (dim, dim))),
        proj_b=Param(f"{prefix}.attn.proj.b", np.zeros(dim)),
        ln2_g=Param(f"{prefix}.ln2.g", np.ones(dim)),
        ln2_b=Param(f"{prefix}.ln2.b", np.zeros(dim)),
        ffn1_w=Param(f"{prefix}.ffn.w1", rng.normal(0.0, INIT_SCALE, (dim, hidden))),
        ffn1_b=Param(f"{prefix}.ffn.b1", np.zeros(hidden)),
        ffn2_w=Param(f"{prefix}.ffn.w2", rng.normal(0.0, INIT_SCALE, (hidden, dim))),
        ffn2_b=Param(f"{prefix}.ffn.b2", np.zeros(dim)),
    )


def heads_attention(
    q: Tensor, k: Tensor, v: Tensor, heads: int, attn_mask: Tensor | None = None
) -> Tensor:
    """Scaled dot-product attention, computed per head over column slices."""
    dim = q.shape[1]
    if dim % heads != 0:
        raise nc.ShapeMismatchError(f"dim {dim} not divisible by heads {heads}")
    hd = dim // heads
    scale = 1.0 / math.sqrt(hd)
    outs = []
    for i in range(heads):
        qh = nc.slice_cols(q, i * hd, (i + 1) * hd)
        kh = nc.slice_cols(k, i * hd, (i + 1) * hd)
        vh = nc.slice_cols(v, i * hd, (i + 1) * hd)
        scores = nc.mul_scalar(nc.matmul(qh, nc.transpose(kh)), scale)
        if attn_mask is not None:
            scores = nc.add(scores, attn_mask)
        outs.append(nc.matmul(nc.softmax_lastdim(scores), vh))
    return nc.concat_cols(outs)


def run_block(h: Tensor, w: BlockWeights, heads: int, attn_mask: Tensor | None = None) -> Tensor:
    dim = h.shape[1]
    n = nc.layer_norm_lastdim(h, w.ln1_g, w.ln1_b)
    qkv = nc.add(nc.matmul(n, w.qkv_w), w.qkv_b)
    q = nc.slice_cols(qkv, 0, dim)
    k = nc.slice_cols(qkv, dim, 2 * dim)
    v = nc.slice_cols(qkv, 2 * dim, 3 * dim)
    att = heads_attention(q, k, v, heads, attn_mask)
    h = nc.add(h, nc.add(nc.matmul(att, w.proj_w), w.proj_b))
    n2 = nc.layer_norm_lastdim(h, w.ln2_g, w.ln2_b)
    ff = nc.add(nc.matmul(nc.gelu(nc.add(nc.matmul(n2, w.ffn1_w), w.ffn1_b)), w.ffn2_w), w.ffn2_b)
    return nc.add(h, ff)


def sinusoidal_positions_2d(grid: int, dim: int) -> np.ndarray:
    """Deterministic 2-D sin/cos table for a grid x grid token layout."""
    if dim % 4 != 0:
        raise ValueError(f"dim must be divisible by 4 for 2-D positions, got {dim}")
    quarter = dim // 4
    freqs = 1.0 / (10000.0 ** (np.arange(quarter) / quarter))
    rows, cols = np.divmod(np.arange(grid * grid), grid)
    out = np.empty((grid * grid, dim))
    out[:, 0 * quarter:1 * quarter] = np.sin(cols[:, None] * freqs)
    out[:, 1 * quarter:2 * quarter] = np.cos(cols[:, None] * freqs)
    out[:, 2 * quarter:3 * quarter] = np.sin(rows[:, None] * freqs)
    out[:, 3 * quarter:4 * quarter] = np.cos(rows[:, None] * freqs)
    return out


def sinusoidal_positions_1d(length: int, dim: int) -> np.ndarray:
    if dim % 2 != 0:
        raise ValueError(f"dim must be even for 1-D positions, got {dim}")
    half = dim // 2
    freqs = 1.0 / (10000.0 ** (np.arange(half) / half))
    pos = np.arange(length)
    out = np.empty((length, dim))
    out[:, :half] = np.sin(pos[:, None] * freqs)
    out[:, half:] = np.cos(pos[:, None] * freqs)
    return out
