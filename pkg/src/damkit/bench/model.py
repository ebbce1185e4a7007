"""Benchmark data model: regions with positive/negative multiple-choice questions."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

POSITIVE = "positive"
NEGATIVE = "negative"

POSITIVE_POINTS = {1.0, 0.5, 0.0, -1.0}
NEGATIVE_POINTS = {1.0, 0.0, -1.0}


class FixtureError(ValueError):
    """A benchmark fixture violates the schema or scoring rules."""


@dataclass(frozen=True)
class QuestionOption:
    label: str
    text: str
    points: float


@dataclass
class BenchQuestion:
    id: str
    region_id: str
    kind: str  # POSITIVE or NEGATIVE
    text: str
    options: list[QuestionOption]
    is_recognition: bool = False
    mock_triggers: dict[str, list[str]] = field(default_factory=dict)
    mock_fallback: str | None = None

    def __post_init__(self):
        if self.kind not in (POSITIVE, NEGATIVE):
            raise FixtureError(f"question {self.id}: kind must be positive|negative, got {self.kind!r}")
        if not self.options:
            raise FixtureError(f"question {self.id}: no options")
        labels = [o.label for o in self.options]
        if len(labels) != len(set(labels)):
            raise FixtureError(f"question {self.id}: duplicate option labels")
        allowed = POSITIVE_POINTS if self.kind == POSITIVE else NEGATIVE_POINTS
        for o in self.options:
            if o.points not in allowed:
                raise FixtureError(
                    f"question {self.id}: option {o.label} has points {o.points}, "
                    f"allowed for {self.kind}: {sorted(allowed)}"
                )
        if self.max_points <= 0:
            raise FixtureError(f"question {self.id}: no option awards positive points")
        for label, kws in self.mock_triggers.items():
            if label not in set(labels):
                raise FixtureError(f"question {self.id}: trigger for unknown label {label!r}")
            if not kws:
                raise FixtureError(f"question {self.id}: empty trigger list for label {label!r}")
        if self.mock_fallback is not None and self.mock_fallback not in set(labels):
            raise FixtureError(f"question {self.id}: fallback {self.mock_fallback!r} is not an option")

    @property
    def labels(self) -> list[str]:
        return [o.label for o in self.options]

    @property
    def max_points(self) -> float:
        return max(o.points for o in self.options)

    def option_points(self, label: str) -> float:
        for o in self.options:
            if o.label == label:
                return o.points
        raise FixtureError(f"question {self.id}: no option labelled {label!r}")


@dataclass
class BenchRegion:
    region_id: str
    image: str
    mask: str
    questions: list[BenchQuestion]

    def __post_init__(self):
        if not self.questions:
            raise FixtureError(f"region {self.region_id}: no questions")
        rec = [q for q in self.questions if q.is_recognition]
        if len(rec) > 1:
            raise FixtureError(f"region {self.region_id}: more than one recognition question")
        for q in self.questions:
            if q.region_id != self.region_id:
                raise FixtureError(
                    f"question {q.id} belongs to {q.region_id!r}, found under {self.region_id!r}"
                )

    @property
    def recognition_question(self) -> BenchQuestion | None:
        for q in self.questions:
            if q.is_recognition:
                return q
        return None


def _question_from_dict(d: dict) -> BenchQuestion:
    mock = d.get("x-mock", {})
    return BenchQuestion(
        id=d["id"],
        region_id=d["region_id"],
        kind=d["kind"],
        text=d["text"],
        options=[QuestionOption(o["label"], o["text"], float(o["points"])) for o in d["options"]],
        is_recognition=bool(d.get("is_recognition", False)),
        mock_triggers={k: list(v) for k, v in mock.get("triggers", {}).items()},
        mock_fallback=mock.get("fallback"),
    )


def load_bench(path) -> list[BenchRegion]:
    """Parse and validate a benchmark file: ``{"regions": [...]}``."""
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise FixtureError(f"benchmark file {path} is not valid JSON: {e}") from e
    regions = []
    seen = set()
    for rd in payload.get("regions", []):
        region = BenchRegion(
            region_id=rd["region_id"],
            image=rd.get("image", ""),
            mask=rd.get("mask", ""),
            questions=[_question_from_dict(q) for q in rd.get("questions", [])],
        )
        if region.region_id in seen:
            raise FixtureError(f"duplicate region_id {region.region_id!r}")
        seen.add(region.region_id)
        regions.append(region)
    if not regions:
        raise FixtureError(f"benchmark file {path} has no regions")
    return regions


def load_predictions(path) -> dict[str, str]:
    """Region id -> generated description."""
    payload = json.loads(Path(path).read_text())
    if not isinstance(payload, dict):
        raise FixtureError(f"predictions file {path} must be a JSON object")
    return {str(k): str(v) for k, v in payload.items()}
