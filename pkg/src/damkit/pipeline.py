"""Two-stage data-pipeline simulator.

Stage 1 expands human keywords into detailed captions through an annotator
callable. Stage 2 self-labels proposed regions with a describer, filters them
by a confidence scorer, and enforces the per-image instance rules: at most
two kept regions, and a two-region image must carry two distinct classes.
Detector, segmenter and similarity models are deliberately behind plain
callables; deterministic synthetic implementations live at the bottom.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

SUPERVISED = "supervised"
SELF_LABELED = "self_labeled"

LOW_CONFIDENCE = "LowConfidence"
TOO_MANY_INSTANCES = "TooManyInstances"
DUPLICATE_CLASS = "DuplicateClass"

GRANULARITY_WORD_LIMITS = {"keyword": 4, "phrase": 12, "detailed": None}


class AnnotatorFailure(RuntimeError):
    """The stage-1 annotator could not caption a region."""


class SummarizerFailure(RuntimeError):
    """The summarizer could not produce the requested granularity."""


@dataclass
class LabeledRegion:
    image: str
    mask: str
    keyword: str
    caption: str | None = None
    source: str = SUPERVISED
    confidence: float = 1.0

    def __post_init__(self):
        if self.source == SUPERVISED and not self.keyword:
            raise ValueError("supervised regions need a keyword")
        if self.source == SELF_LABELED and not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class PipelineConfig:
    conf_threshold: float = 0.5
    max_instances_per_image: int = 2
    class_name_prob: float = 0.5
    granularities: tuple[str, ...] = ("keyword", "phrase", "detailed")

    def __post_init__(self):
        if not (0.0 <= self.conf_threshold <= 1.0):
            raise ValueError(f"conf_threshold {self.conf_threshold} outside [0, 1]")
        if self.max_instances_per_image < 1:
            raise ValueError("max_instances_per_image must be >= 1")
        unknown = set(self.granularities) - set(GRANULARITY_WORD_LIMITS)
        if unknown:
            raise ValueError(f"unknown granularities: {sorted(unknown)}")


@dataclass(frozen=True)
class RegionProposal:
    mask: str
    class_name: str
    score: float


@dataclass
class ImageProposals:
    image: str
    regions: list[RegionProposal] = field(default_factory=list)


@dataclass(frozen=True)
class Rejection:
    image: str
    region_index: int
    class_name: str
    reason: str  # LOW_CONFIDENCE | TOO_MANY_INSTANCES | DUPLICATE_CLASS


def stage1_expand(regions: list[LabeledRegion], annotator) -> list[LabeledRegion]:
    """Expand each supervised keyword into a caption; failed or empty
    annotations drop the region without aborting the batch. Input order is
    preserved."""
    out = []
    for r in regions:
        try:
            caption = annotator(r.image, r.mask, r.keyword)
        except AnnotatorFailure as e:
            log.warning("annotator failed on %s (%s): %s", r.image, r.keyword, e)
            continue
        if not caption:
            log.warning("annotator returned empty caption for %s (%s)", r.image, r.keyword)
            continue
        out.append(
            LabeledRegion(r.image, r.mask, r.keyword, caption, SUPERVISED, r.confidence)
        )
    return out


def stage2_selftrain(
    unlabeled: list[ImageProposals], describer, scorer, config: PipelineConfig
) -> tuple[list[LabeledRegion], list[Rejection]]:
    """Describe, confidence-filter and instance-select proposed regions.

    Per image: every proposal is captioned by ``describer(image, proposal)``
    and scored by ``scorer(caption, image, proposal)``; scores below the
    threshold are rejected. Survivors are considered in order of confidence
    (ties: lower region index first); a survivor is rejected when its class is
    already kept for the image, or when the image already holds
    ``max_instances_per_image`` regions. Accepted regions come back in input
    order; accepted + rejected always partition the input.
    """
    accepted: list[LabeledRegion] = []
    rejections: list[Rejection] = []
    for item in unlabeled:
        scored = []
        for idx, proposal in enumerate(item.regions):
            caption = describer(item.image, proposal)
            conf = float(scorer(caption, item.image, proposal))
            if conf < config.conf_threshold:
                rejections.append(
                    Rejection(item.image, idx, proposal.class_name, LOW_CONFIDENCE)
                )
                continue
            scored.append((idx, proposal, caption, conf))
        keep_idx = set()
        seen_classes = set()
        for idx, proposal, caption, conf in sorted(scored, key=lambda t: (-t[3], t[0])):
            if proposal.class_name in seen_classes:
                rejections.append(
                    Rejection(item.image, idx, proposal.class_name, DUPLICATE_CLASS)
                )
            elif len(keep_idx) >= config.max_instances_per_image:
                rejections.append(
                    Rejection(item.image, idx, proposal.class_name, TOO_MANY_INSTANCES)
                )
            else:
                keep_idx.add(idx)
                seen_classes.add(proposal.class_name)
        for idx, proposal, caption, conf in scored:
            if idx in keep_idx:
                accepted.append(
                    LabeledRegion(
                        image=item.image,
                        mask=proposal.mask,
                        keyword=proposal.class_name,
                        caption=caption,
                        source=SELF_LABELED,
                        confidence=conf,
                    )
                )
    for r in rejections:
        log.info("rejected %s region %d (%s): %s", r.image, r.region_index, r.class_name, r.reason)
    return accepted, rejections


def summarize_granularities(caption: str, summarizer, config: PipelineConfig) -> dict[str, str]:
    """One output per configured granularity; 'detailed' is the input itself.

    Summarizer output is truncated at word boundaries to the granularity's
    word limit; a SummarizerFailure omits that granularity.
    """
    if not caption:
        raise ValueError("caption must be nonempty")
    out: dict[str, str] = {}
    for gran in config.granularities:
        limit = GRANULARITY_WORD_LIMITS[gran]
        if limit is None:
            out[gran] = caption
            continue
        try:
            text = summarizer(caption, gran)
        except SummarizerFailure as e:
            log.warning("summarizer failed for %s: %s", gran, e)
            continue
        words = text.split()
        if len(words) > limit:
            log.info("truncating %s summary from %d to %d words", gran, len(words), limit)
            words = words[:limit]
        out[gran] = " ".join(words)
    return out


def emit_training_set(
    regions: list[LabeledRegion], out_path, class_name_prob: float, seed: int
) -> Path:
    """Write captioner-format JSONL; each sample's prompt mentions the class
    keyword with probability ``class_name_prob`` (seeded, byte-reproducible)."""
    rng = np.random.Generator(np.random.Philox(seed))
    lines = []
    for r in regions:
        if not r.caption:
            raise ValueError(f"region on {r.image} has no caption")
        if rng.random() < class_name_prob:
            prompt = f"describe the {r.keyword} in the masked region"
        else:
            prompt = "describe the masked region"
        lines.append(
            json.dumps(
                {"image": r.image, "mask": r.mask, "caption": r.caption.split(), "prompt": prompt}
            )
        )
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text("\n".join(lines) + "\n")
    return out_path


def write_rejections_csv(rejections: list[Rejection], path) -> Path:
    path = Path(path)
    lines = ["image,region_index,class,reason"]
    lines += [f"{r.image},{r.region_index},{r.class_name},{r.reason}" for r in rejections]
    path.write_text("\n".join(lines) + "\n")
    return path


def load_manifest(path) -> list[ImageProposals]:
    """JSONL of ``{"image", "regions": [{"mask", "class", "score"}]}``."""
    items = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        items.append(
            ImageProposals(
                image=rec["image"],
                regions=[
                    RegionProposal(m["mask"], m["class"], float(m.get("score", 1.0)))
                    for m in rec.get("regions", [])
                ],
            )
        )
    return items


def _unit_hash(text: str) -> float:
    """Stable hash of a string mapped into [0, 1)."""
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def synthetic_describer(image: str, proposal: RegionProposal) -> str:
    variants = ["small", "large", "weathered", "bright", "partially occluded"]
    pick = variants[int(_unit_hash(f"desc|{image}|{proposal.mask}") * len(variants))]
    return f"a {pick} {proposal.class_name} against a plain background"


def synthetic_scorer(caption: str, image: str, proposal: RegionProposal) -> float:
    return _unit_hash(f"score|{image}|{proposal.mask}|{caption}")


def make_synthetic_manifest(n_images: int, seed: int) -> list[ImageProposals]:
    """Deterministic proposal manifest for exercising stage 2 at scale."""
    classes = ["cat", "dog", "car", "tree", "bird", "house"]
    rng = np.random.Generator(np.random.Philox(seed))
    items = []
    for i in range(n_images):
        n_regions = int(rng.integers(1, 5))
        regions = [
            RegionProposal(
                mask=f"img{i:05d}_r{j}.json",
                class_name=classes[int(rng.integers(len(classes)))],
                score=float(rng.random()),
            )
            for j in range(n_regions)
        ]
        items.append(ImageProposals(image=f"img{i:05d}.ppm", regions=regions))
    return items
