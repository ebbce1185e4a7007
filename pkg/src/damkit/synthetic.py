"""Synthetic fixtures: the four-colored-squares localization task.

Each 32x32 image holds four 8x8 squares, one per quadrant, colored with a
random permutation of four colors; the mask selects one square and the
caption is that square's color word. Localization is necessary (all four
colors are present in every image) and sufficient (the masked square fully
determines the answer).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .captioner import CaptionSample, Vocab
from .geometry import Image, RegionMask

CANVAS = 32
SQUARE = 8
ANCHORS = [(4, 4), (20, 4), (4, 20), (20, 20)]  # (x, y) of each quadrant square
TASK_COLORS = ["red", "green", "blue", "yellow"]
COLOR_RGB = {
    "red": (0.9, 0.1, 0.1),
    "green": (0.1, 0.8, 0.15),
    "blue": (0.1, 0.2, 0.9),
    "yellow": (0.9, 0.85, 0.1),
}


def color_squares_sample(rng: np.random.Generator) -> tuple[Image, RegionMask, str]:
    """One task instance: image, mask over the chosen square, its color word."""
    canvas = np.zeros((CANVAS, CANVAS, 3))
    order = [TASK_COLORS[i] for i in rng.permutation(len(TASK_COLORS))]
    for (x, y), color in zip(ANCHORS, order):
        canvas[y:y + SQUARE, x:x + SQUARE] = COLOR_RGB[color]
    pick = int(rng.integers(len(ANCHORS)))
    mask = np.zeros((CANVAS, CANVAS), dtype=bool)
    x, y = ANCHORS[pick]
    mask[y:y + SQUARE, x:x + SQUARE] = True
    return Image(canvas), RegionMask(mask), order[pick]


def build_color_task(n: int, seed: int) -> list[tuple[Image, RegionMask, str]]:
    rng = np.random.Generator(np.random.Philox(seed))
    return [color_squares_sample(rng) for _ in range(n)]


def to_caption_samples(raw: list[tuple[Image, RegionMask, str]], vocab: Vocab) -> list[CaptionSample]:
    return [CaptionSample(img, mask, vocab.encode_caption([word])) for img, mask, word in raw]


def ablate_masks(samples: list[CaptionSample]) -> list[CaptionSample]:
    """Replace every mask with all-ones, destroying the localization signal."""
    return [
        CaptionSample(s.image, RegionMask.full(s.image.width, s.image.height), list(s.target))
        for s in samples
    ]


def write_dataset(raw: list[tuple[Image, RegionMask, str]], out_dir, vocab: Vocab) -> Path:
    """Write PPM/RLE files plus the JSONL manifest and vocab; returns the JSONL path."""
    from .imageio import save_mask_rle, save_ppm

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    for i, (img, mask, word) in enumerate(raw):
        img_name = f"img{i:04d}.ppm"
        mask_name = f"mask{i:04d}.json"
        save_ppm(img, out_dir / img_name)
        save_mask_rle(mask, out_dir / mask_name)
        lines.append(json.dumps({"image": img_name, "mask": mask_name, "caption": [word]}))
    jsonl = out_dir / "dataset.jsonl"
    jsonl.write_text("\n".join(lines) + "\n")
    vocab.save(out_dir / "vocab.json")
    return jsonl
