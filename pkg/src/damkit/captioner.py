"""Toy autoregressive caption decoder over vision tokens.

The decoder prefixes the vision sequence to the embedded text tokens and runs
causal pre-norm blocks: every text position sees all vision tokens plus the
text to its left. Training is plain Adam on cross-entropy; decoding is greedy
with argmax ties broken toward the lowest token id.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import numcore as nc
from .backbone import (
    BackboneConfig,
    BackboneParams,
    VisionTokens,
    forward,
    init_backbone_params,
)
from .geometry import Image, RegionMask, build_focal_prompt
from .numcore import Param, Tensor
from .transformer import BlockWeights, init_block, run_block, sinusoidal_positions_1d

PAD, BOS, EOS = "<pad>", "<bos>", "<eos>"
PAD_ID, BOS_ID, EOS_ID = 0, 1, 2
NUM_SPECIALS = 3

DEFAULT_VOCAB_TOKENS = [
    PAD, BOS, EOS,
    "red", "green", "blue", "yellow", "orange", "purple",
    "cyan", "magenta", "brown", "pink", "white", "black",
    "square", "circle", "triangle", "star",
    "a", "the", "with", "and", "object",
]

ATTN_NEG = -1e9


class VocabOverflowError(ValueError):
    """A token id fell outside the vocabulary."""


class Vocab:
    """Token list with the three specials pinned to ids 0..2."""

    def __init__(self, tokens: list[str]):
        if len(tokens) != len(set(tokens)):
            raise ValueError("vocabulary tokens must be unique")
        if tokens[:NUM_SPECIALS] != [PAD, BOS, EOS]:
            raise ValueError(f"vocabulary must start with {PAD}, {BOS}, {EOS}")
        self.tokens = list(tokens)
        self._ids = {t: i for i, t in enumerate(tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def id_of(self, token: str) -> int:
        if token not in self._ids:
            raise VocabOverflowError(f"unknown token {token!r}")
        return self._ids[token]

    def encode_caption(self, words: list[str]) -> list[int]:
        """Wrap content words as [BOS, words..., EOS] ids."""
        return [BOS_ID] + [self.id_of(w) for w in words] + [EOS_ID]

    def decode(self, ids: list[int]) -> list[str]:
        for i in ids:
            if not (0 <= i < len(self.tokens)):
                raise VocabOverflowError(f"token id {i} out of range for vocab size {len(self.tokens)}")
        return [self.tokens[i] for i in ids]

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.tokens))

    @classmethod
    def load(cls, path) -> "Vocab":
        return cls(json.loads(Path(path).read_text()))

    @classmethod
    def default(cls) -> "Vocab":
        return cls(DEFAULT_VOCAB_TOKENS)


@dataclass
class CaptionSample:
    image: Image
    mask: RegionMask
    target: list[int]  # [BOS, ..., EOS]

    def __post_init__(self):
        if not self.target or self.target[0] != BOS_ID or self.target[-1] != EOS_ID:
            raise ValueError("caption target must start with BOS and end with EOS")
        if not self.mask.data.any():
            raise ValueError("caption sample mask is empty")


@dataclass(frozen=True)
class CaptionerConfig:
    """Everything needed to build and train the toy captioner."""

    backbone: BackboneConfig = BackboneConfig()
    decoder_layers: int = 2
    decoder_heads: int = 2
    decoder_ffn_mult: int = 4
    max_text: int = 8
    alpha: float = 3.0
    min_side: int = 8  # toy images are 32 px; the production 48 px floor would always cover them
    batch_size: int = 8

    def to_json(self) -> str:
        d = dict(self.__dict__)
        d["backbone"] = self.backbone.__dict__
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CaptionerConfig":
        d = json.loads(text)
        if "backbone" in d:
            d["backbone"] = BackboneConfig(**d["backbone"])
        return cls(**d)

    @classmethod
    def load(cls, path) -> "CaptionerConfig":
        return cls.from_json(Path(path).read_text())


@dataclass
class DecoderParams:
    tok_embed: Param
    text_pos: Param
    blocks: list[BlockWeights]
    lnf_g: Param
    lnf_b: Param
    out_w: Param
    out_b: Param

    def params(self) -> list[Param]:
        out = [self.tok_embed, self.text_pos]
        for b in self.blocks:
            out.extend(b.params())
        out.extend([self.lnf_g, self.lnf_b, self.out_w, self.out_b])
        return out


@dataclass
class CaptionerParams:
    backbone: BackboneParams
    decoder: DecoderParams

    def params(self) -> list[Param]:
        return self.backbone.params() + self.decoder.params()


def init_decoder_params(
    vocab_size: int, config: CaptionerConfig, seed: int, zero: bool = False
) -> DecoderParams:
    """Fresh decoder; ``zero=True`` yields all-zero weights (uniform logits)."""
    rng = np.random.Generator(np.random.Philox(seed))
    d = config.backbone.dim
    scale = 0.0 if zero else 0.02
    tok = rng.normal(0.0, scale, (vocab_size, d)) if not zero else np.zeros((vocab_size, d))
    pos = np.zeros((config.max_text, d)) if zero else sinusoidal_positions_1d(config.max_text, d)
    blocks = []
    for i in range(config.decoder_layers):
        b = init_block(f"decoder.block{i}", d, config.decoder_ffn_mult, rng)
        if zero:
            for p in b.params():
                p.data[...] = 0.0
        blocks.append(b)
    return DecoderParams(
        tok_embed=Param("decoder.tok_embed", tok),
        text_pos=Param("decoder.text_pos", pos),
        blocks=blocks,
        lnf_g=Param("decoder.lnf.g", np.zeros(d) if zero else np.ones(d)),
        lnf_b=Param("decoder.lnf.b", np.zeros(d)),
        out_w=Param("decoder.out.w", np.zeros((d, vocab_size)) if zero else rng.normal(0.0, scale, (d, vocab_size))),
        out_b=Param("decoder.out.b", np.zeros(vocab_size)),
    )


def init_captioner_params(vocab_size: int, config: CaptionerConfig, seed: int) -> CaptionerParams:
    return CaptionerParams(
        backbone=init_backbone_params(config.backbone, seed),
        decoder=init_decoder_params(vocab_size, config, seed + 1),
    )


def build_prefix_causal_mask(n_vision: int, n_text: int) -> np.ndarray:
    """Additive attention mask: vision is a bidirectional prefix, text is causal.

    Entry [i, j] is 0 where position i may attend to j and a large negative
    number where it may not. Text positions always see every vision position.
    """
    n = n_vision + n_text
    mask = np.full((n, n), ATTN_NEG)
    mask[:n_vision, :n_vision] = 0.0
    for t in range(n_text):
        i = n_vision + t
        mask[i, :n_vision] = 0.0
        mask[i, n_vision:i + 1] = 0.0
    return mask


def decode_logits(
    vision: VisionTokens, text_prefix: list[int], dparams: DecoderParams, config: CaptionerConfig
) -> Tensor:
    """Logits for each text position given the vision prefix and earlier text."""
    vocab_size = dparams.tok_embed.shape[0]
    ids = list(text_prefix)
    if not ids or ids[0] != BOS_ID:
        raise ValueError("text prefix must start with BOS")
    for i in ids:
        if not (0 <= i < vocab_size):
            raise VocabOverflowError(f"token id {i} out of range for vocab size {vocab_size}")
    if len(ids) > config.max_text:
        raise ValueError(f"text prefix length {len(ids)} exceeds max_text {config.max_text}")
    n_vision = vision.seq.shape[0]
    n_text = len(ids)
    text = nc.add(
        nc.embedding_lookup(dparams.tok_embed, np.asarray(ids)),
        nc.slice_seq(dparams.text_pos, 0, n_text),
    )
    h = nc.concat_seq([vision.seq, text])
    mask = nc.constant(build_prefix_causal_mask(n_vision, n_text))
    for block in dparams.blocks:
        h = run_block(h, block, config.decoder_heads, attn_mask=mask)
    h_text = nc.slice_seq(h, n_vision, n_vision + n_text)
    h_text = nc.layer_norm_lastdim(h_text, dparams.lnf_g, dparams.lnf_b)
    return nc.add(nc.matmul(h_text, dparams.out_w), dparams.out_b)


def sample_loss(
    prompt, target: list[int], cparams: CaptionerParams, config: CaptionerConfig
) -> Tensor:
    vision = forward(prompt, cparams.backbone, config.backbone)
    logits = decode_logits(vision, target[:-1], cparams.decoder, config)
    return nc.cross_entropy_lastdim(logits, np.asarray(target[1:]))


def greedy_decode(
    vision: VisionTokens, dparams: DecoderParams, config: CaptionerConfig, max_len: int
) -> list[int]:
    """Argmax decoding from [BOS] until EOS or ``max_len`` total tokens."""
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    seq = [BOS_ID]
    with nc.no_grad():
        while len(seq) < min(max_len, config.max_text):
            logits = decode_logits(vision, seq, dparams, config)
            nxt = int(np.argmax(logits.data[-1]))
            seq.append(nxt)
            if nxt == EOS_ID:
                break
    return seq[:max_len]


@dataclass
class EpochStats:
    epoch: int
    steps: int  # cumulative optimizer steps at end of epoch
    loss: float
    token_accuracy: float  # greedy accuracy over content (non-special) positions


@dataclass
class TrainResult:
    history: list[EpochStats] = field(default_factory=list)
    params: CaptionerParams | None = None
    config: CaptionerConfig | None = None


def token_accuracy(
    samples: list[CaptionSample], prompts, cparams: CaptionerParams, config: CaptionerConfig
) -> float:
    """Teacher-forced argmax accuracy over positions whose target is a content token.

    Specials (PAD/BOS/EOS) are structural and excluded, so chance level on a
    k-way content vocabulary is 1/k.
    """
    hits = 0
    total = 0
    with nc.no_grad():
        for sample, prompt in zip(samples, prompts):
            vision = forward(prompt, cparams.backbone, config.backbone)
            logits = decode_logits(vision, sample.target[:-1], cparams.decoder, config)
            preds = np.argmax(logits.data, axis=-1)
            labels = np.asarray(sample.target[1:])
            content = labels >= NUM_SPECIALS
            hits += int((preds[content] == labels[content]).sum())
            total += int(content.sum())
    return hits / total if total else 0.0


def build_prompts(samples: list[CaptionSample], config: CaptionerConfig):
    return [
        build_focal_prompt(s.image, s.mask, config.alpha, config.min_side, config.backbone.enc_res)
        for s in samples
    ]


def train_toy(
    dataset: list[CaptionSample],
    config: CaptionerConfig,
    epochs: int,
    lr: float,
    seed: int,
    vocab_size: int | None = None,
    max_steps: int | None = None,
) -> TrainResult:
    """Adam training of backbone + decoder on caption samples.

    Deterministic for a fixed seed: parameter init, shuffling, and update
    order all derive from it. Stops early once ``max_steps`` optimizer steps
    have run.
    """
    if not dataset:
        raise ValueError("train_toy needs a nonempty dataset")
    if vocab_size is None:
        vocab_size = max(max(s.target) for s in dataset) + 1
    cparams = init_captioner_params(vocab_size, config, seed)
    prompts = build_prompts(dataset, config)
    all_params = cparams.params()
    rng = np.random.Generator(np.random.Philox(seed + 2))
    result = TrainResult(params=cparams, config=config)
    steps = 0
    for epoch in range(epochs):
        order = rng.permutation(len(dataset))
        losses = []
        for ofs in range(0, len(order), config.batch_size):
            batch = order[ofs:ofs + config.batch_size]
            for p in all_params:
                p.zero_grad()
            total = None
            for idx in batch:
                loss = sample_loss(prompts[idx], dataset[idx].target, cparams, config)
                total = loss if total is None else nc.add(total, loss)
            total = nc.mul_scalar(total, 1.0 / len(batch))
            total.backward()
            nc.adam_step(all_params, lr)
            losses.append(total.item())
            steps += 1
            if max_steps is not None and steps >= max_steps:
                break
        acc = token_accuracy(dataset, prompts, cparams, config)
        result.history.append(EpochStats(epoch, steps, float(np.mean(losses)), acc))
        if max_steps is not None and steps >= max_steps:
            break
    return result


def load_dataset(jsonl_path, vocab: Vocab) -> list[CaptionSample]:
    """Read caption samples from JSON lines referencing PPM images and RLE masks.

    Each line is ``{"image": path, "mask": path, "caption": [words]}`` with
    paths relative to the JSONL file; BOS/EOS are added here.
    """
    from .imageio import load_mask_rle, load_ppm

    base = Path(jsonl_path).parent
    samples = []
    for line in Path(jsonl_path).read_text().splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        samples.append(
            CaptionSample(
                image=load_ppm(base / rec["image"]),
                mask=load_mask_rle(base / rec["mask"]),
                target=vocab.encode_caption(rec["caption"]),
            )
        )
    return samples
