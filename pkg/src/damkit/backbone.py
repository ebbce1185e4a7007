"""Mask-aware dual vision encoders.

The global encoder is a plain pre-norm ViT over the full view. The regional
encoder reuses the *same* self-attention block weights on the focal view and,
after each block, applies a gated cross-attention adapter that attends to the
global features, then a gated feed-forward. Both gates are tanh of scalar
parameters initialized to zero, and the mask patch embedding starts at exactly
zero, so a fresh model is indistinguishable from a plain encoder that never
saw a mask. Neither view changes the token count.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import numcore as nc
from .geometry import FocalPrompt, Image, RegionMask
from .numcore import Param, Tensor
from .transformer import (
    INIT_SCALE,
    BlockWeights,
    heads_attention,
    init_block,
    run_block,
    sinusoidal_positions_2d,
)

MAX_VIDEO_FRAMES = 8


class EmptyInputError(ValueError):
    """A frame sequence with no frames was supplied."""


@dataclass(frozen=True)
class BackboneConfig:
    enc_res: int = 32
    patch: int = 4
    dim: int = 32
    heads: int = 2
    layers: int = 2
    ffn_mult: int = 4
    adapter_heads: int = 2

    def __post_init__(self):
        if self.enc_res % self.patch != 0:
            raise ValueError(f"enc_res {self.enc_res} not divisible by patch {self.patch}")
        if self.dim % self.heads != 0:
            raise ValueError(f"dim {self.dim} not divisible by heads {self.heads}")
        if self.dim % self.adapter_heads != 0:
            raise ValueError(f"dim {self.dim} not divisible by adapter_heads {self.adapter_heads}")

    @property
    def grid(self) -> int:
        return self.enc_res // self.patch

    @property
    def tokens(self) -> int:
        return self.grid * self.grid

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "BackboneConfig":
        return cls(**json.loads(text))

    @classmethod
    def load(cls, path) -> "BackboneConfig":
        return cls.from_json(Path(path).read_text())


@dataclass
class AdapterWeights:
    """Gated cross-attention + feed-forward adapter appended to one block."""

    q_w: Param
    q_b: Param
    k_w: Param
    k_b: Param
    v_w: Param
    v_b: Param
    o_w: Param
    o_b: Param
    ffn1_w: Param
    ffn1_b: Param
    ffn2_w: Param
    ffn2_b: Param
    gamma: Param
    beta: Param

    def params(self) -> list[Param]:
        return [
            self.q_w, self.q_b, self.k_w, self.k_b, self.v_w, self.v_b,
            self.o_w, self.o_b, self.ffn1_w, self.ffn1_b, self.ffn2_w, self.ffn2_b,
            self.gamma, self.beta,
        ]


@dataclass
class BackboneParams:
    img_w: Param
    img_b: Param
    mask_w: Param
    mask_b: Param
    pos: Param
    blocks: list[BlockWeights] = field(default_factory=list)
    adapters: list[AdapterWeights] = field(default_factory=list)

    def params(self) -> list[Param]:
        out = [self.img_w, self.img_b, self.mask_w, self.mask_b, self.pos]
        for b in self.blocks:
            out.extend(b.params())
        for a in self.adapters:
            out.extend(a.params())
        return out


@dataclass
class VisionTokens:
    seq: Tensor
    provenance: str  # "global" | "regional" | "video"


def _init_adapter(prefix: str, dim: int, ffn_mult: int, rng: np.random.Generator) -> AdapterWeights:
    hidden = ffn_mult * dim
    return AdapterWeights(
        q_w=Param(f"{prefix}.xattn.q.w", rng.normal(0.0, INIT_SCALE, (dim, dim))),
        q_b=Param(f"{prefix}.xattn.q.b", np.zeros(dim)),
        k_w=Param(f"{prefix}.xattn.k.w", rng.normal(0.0, INIT_SCALE, (dim, dim))),
        k_b=Param(f"{prefix}.xattn.k.b", np.zeros(dim)),
        v_w=Param(f"{prefix}.xattn.v.w", rng.normal(0.0, INIT_SCALE, (dim, dim))),
        v_b=Param(f"{prefix}.xattn.v.b", np.zeros(dim)),
        o_w=Param(f"{prefix}.xattn.o.w", rng.normal(0.0, INIT_SCALE, (dim, dim))),
        o_b=Param(f"{prefix}.xattn.o.b", np.zeros(dim)),
        ffn1_w=Param(f"{prefix}.ffn.w1", rng.normal(0.0, INIT_SCALE, (dim, hidden))),
        ffn1_b=Param(f"{prefix}.ffn.b1", np.zeros(hidden)),
        ffn2_w=Param(f"{prefix}.ffn.w2", rng.normal(0.0, INIT_SCALE, (hidden, dim))),
        ffn2_b=Param(f"{prefix}.ffn.b2", np.zeros(dim)),
        gamma=Param(f"{prefix}.gate.gamma", np.zeros(())),
        beta=Param(f"{prefix}.gate.beta", np.zeros(())),
    )


def init_backbone_params(config: BackboneConfig, seed: int) -> BackboneParams:
    """Fresh parameters: mask embedding and all adapter gates start at exactly zero."""
    rng = np.random.Generator(np.random.Philox(seed))
    d = config.dim
    p = config.patch
    return BackboneParams(
        img_w=Param("backbone.img_embed.w", rng.normal(0.0, INIT_SCALE, (p * p * 3, d))),
        img_b=Param("backbone.img_embed.b", np.zeros(d)),
        mask_w=Param("backbone.mask_embed.w", np.zeros((p * p, d))),
        mask_b=Param("backbone.mask_embed.b", np.zeros(d)),
        pos=Param("backbone.pos", sinusoidal_positions_2d(config.grid, d)),
        blocks=[init_block(f"backbone.block{i}", d, config.ffn_mult, rng) for i in range(config.layers)],
        adapters=[_init_adapter(f"backbone.adapter{i}", d, config.ffn_mult, rng) for i in range(config.layers)],
    )


def extract_patches(arr: np.ndarray, patch: int) -> np.ndarray:
    """(res, res, C) or (res, res) -> (tokens, patch*patch*C), tokens row-major."""
    if arr.ndim == 2:
        arr = arr[:, :, None]
    res = arr.shape[0]
    c = arr.shape[2]
    g = res // patch
    tiles = arr.reshape(g, patch, g, patch, c).transpose(0, 2, 1, 3, 4)
    return np.ascontiguousarray(tiles).reshape(g * g, patch * patch * c)


def embed_view(image: Image, mask: RegionMask, params: BackboneParams, config: BackboneConfig) -> VisionTokens:
    """Image patches + mask patches + positions, one token per patch."""
    if (image.width, image.height) != (config.enc_res, config.enc_res):
        raise nc.ShapeMismatchError(
            f"view is {image.width}x{image.height}, encoder expects {config.enc_res}x{config.enc_res}"
        )
    if (mask.width, mask.height) != (image.width, image.height):
        raise nc.ShapeMismatchError(
            f"mask {mask.width}x{mask.height} does not match view {image.width}x{image.height}"
        )
    img_patches = nc.constant(extract_patches(image.data, config.patch))
    mask_patches = nc.constant(extract_patches(mask.data.astype(np.float64), config.patch))
    x = nc.add(nc.matmul(img_patches, params.img_w), params.img_b)
    m = nc.add(nc.matmul(mask_patches, params.mask_w), params.mask_b)
    return VisionTokens(nc.add(nc.add(x, m), params.pos), "global")


def encode_global(x: VisionTokens, params: BackboneParams, config: BackboneConfig) -> VisionTokens:
    h = x.seq
    for block in params.blocks:
        h = run_block(h, block, config.heads)
    return VisionTokens(h, "global")


def _cross_attention(h: Tensor, z: Tensor, aw: AdapterWeights, heads: int) -> Tensor:
    q = nc.add(nc.matmul(h, aw.q_w), aw.q_b)
    k = nc.add(nc.matmul(z, aw.k_w), aw.k_b)
    v = nc.add(nc.matmul(z, aw.v_w), aw.v_b)
    att = heads_attention(q, k, v, heads)
    return nc.add(nc.matmul(att, aw.o_w), aw.o_b)


def _adapter_ffn(h: Tensor, aw: AdapterWeights) -> Tensor:
    return nc.add(nc.matmul(nc.gelu(nc.add(nc.matmul(h, aw.ffn1_w), aw.ffn1_b)), aw.ffn2_w), aw.ffn2_b)


def encode_regional(
    x_prime: VisionTokens, z: VisionTokens, params: BackboneParams, config: BackboneConfig
) -> VisionTokens:
    """Shared-weight blocks over the focal view, each followed by its gated adapter."""
    if x_prime.seq.shape != z.seq.shape:
        raise nc.ShapeMismatchError(
            f"focal tokens {x_prime.seq.shape} vs global tokens {z.seq.shape}"
        )
    h = x_prime.seq
    for block, adapter in zip(params.blocks, params.adapters):
        h = run_block(h, block, config.heads)
        ca = _cross_attention(h, z.seq, adapter, config.adapter_heads)
        h = nc.add(h, nc.mul_scalar(ca, nc.tanh(adapter.gamma)))
        ff = _adapter_ffn(h, adapter)
        h = nc.add(h, nc.mul_scalar(ff, nc.tanh(adapter.beta)))
    return VisionTokens(h, "regional")


def forward(prompt: FocalPrompt, params: BackboneParams, config: BackboneConfig) -> VisionTokens:
    """Full view through the global encoder, focal view through the regional one."""
    x = embed_view(prompt.full_image, prompt.full_mask, params, config)
    z = encode_global(x, params, config)
    x_prime = embed_view(prompt.focal_image, prompt.focal_mask, params, config)
    return encode_regional(x_prime, z, params, config)


def forward_video(prompts: list[FocalPrompt], params: BackboneParams, config: BackboneConfig) -> VisionTokens:
    """Per-frame regional features concatenated along the sequence axis."""
    if len(prompts) == 0:
        raise EmptyInputError("forward_video needs at least one frame")
    if len(prompts) > MAX_VIDEO_FRAMES:
        raise ValueError(f"at most {MAX_VIDEO_FRAMES} frames supported, got {len(prompts)}")
    frames = [forward(p, params, config).seq for p in prompts]
    if len(frames) == 1:
        return VisionTokens(frames[0], "video")
    return VisionTokens(nc.concat_seq(frames), "video")
