"""Scoring engine: recognition gating, point schedules, normalization, aggregation.

Rules per region:
  * The recognition question (at most one) is judged first. It gates the rest
    and contributes no points of its own: recognition is correct iff the
    chosen option awards positive points. An unanswered recognition question
    counts as incorrect.
  * Positive and negative questions take the chosen option's points. When
    recognition failed, each contribution is clamped to min(points, 0):
    penalties still bite, awards do not.
  * Unanswered questions score 0 but stay in the denominator.

Percentages: pos_pct = 100 * sum(pos) / sum(pos_max), same for neg;
avg_pct is their arithmetic mean. Penalties can push pos_pct below zero.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .judges import JudgeFailure, JudgeVerdict
from .model import POSITIVE, BenchQuestion, BenchRegion

log = logging.getLogger(__name__)


@dataclass
class QuestionScore:
    question_id: str
    region_id: str
    kind: str
    is_recognition: bool
    chosen_label: str | None
    raw_points: float
    contribution: float
    max_points: float
    unanswered: bool
    raw_response: str


@dataclass
class RegionScore:
    region_id: str
    recognition_ok: bool
    pos_points: float = 0.0
    pos_max: float = 0.0
    neg_points: float = 0.0
    neg_max: float = 0.0
    questions: list[QuestionScore] = field(default_factory=list)


@dataclass
class ScoreReport:
    regions: list[RegionScore]
    judge_meta: dict = field(default_factory=dict)
    missing_predictions: list[str] = field(default_factory=list)

    @property
    def pos_points(self) -> float:
        return sum(r.pos_points for r in self.regions)

    @property
    def pos_max(self) -> float:
        return sum(r.pos_max for r in self.regions)

    @property
    def neg_points(self) -> float:
        return sum(r.neg_points for r in self.regions)

    @property
    def neg_max(self) -> float:
        return sum(r.neg_max for r in self.regions)

    @property
    def pos_pct(self) -> float:
        return 100.0 * self.pos_points / self.pos_max if self.pos_max else 0.0

    @property
    def neg_pct(self) -> float:
        return 100.0 * self.neg_points / self.neg_max if self.neg_max else 0.0

    @property
    def avg_pct(self) -> float:
        return (self.pos_pct + self.neg_pct) / 2.0


def _safe_judge(judge, description: str, question: BenchQuestion) -> JudgeVerdict:
    try:
        verdict = judge(description, question)
    except JudgeFailure as e:
        log.warning("judge failed on %s: %s", question.id, e)
        return JudgeVerdict(question.id, None, f"judge failure: {e}")
    if verdict.chosen_label is not None and verdict.chosen_label not in question.labels:
        log.warning("judge chose unknown label %r on %s", verdict.chosen_label, question.id)
        return JudgeVerdict(question.id, None, verdict.raw_response)
    return verdict


def _assemble_region(
    region: BenchRegion, verdicts: dict[str, JudgeVerdict]
) -> RegionScore:
    rec_q = region.recognition_question
    recognition_ok = True
    if rec_q is not None:
        v = verdicts[rec_q.id]
        recognition_ok = v.chosen_label is not None and rec_q.option_points(v.chosen_label) > 0
    out = RegionScore(region_id=region.region_id, recognition_ok=recognition_ok)
    for q in region.questions:
        v = verdicts[q.id]
        raw = 0.0 if v.chosen_label is None else q.option_points(v.chosen_label)
        if q.is_recognition:
            contribution = 0.0  # gate only, excluded from the point sums
        else:
            contribution = raw if recognition_ok else min(raw, 0.0)
            if q.kind == POSITIVE:
                out.pos_points += contribution
                out.pos_max += q.max_points
            else:
                out.neg_points += contribution
                out.neg_max += q.max_points
        out.questions.append(
            QuestionScore(
                question_id=q.id,
                region_id=region.region_id,
                kind=q.kind,
                is_recognition=q.is_recognition,
                chosen_label=v.chosen_label,
                raw_points=raw,
                contribution=contribution,
                max_points=q.max_points,
                unanswered=v.chosen_label is None,
                raw_response=v.raw_response,
            )
        )
    return out


def score_region(description: str, region: BenchRegion, judge) -> RegionScore:
    """Judge and score one region sequentially."""
    verdicts = {q.id: _safe_judge(judge, description, q) for q in region.questions}
    return _assemble_region(region, verdicts)


def score_run(
    predictions: dict[str, str],
    bench: list[BenchRegion],
    judge,
    workers: int = 1,
    judge_meta: dict | None = None,
) -> ScoreReport:
    """Score every region; regions without a prediction are scored on an empty
    description. Judge calls may run on up to ``workers`` threads; assembly is
    deterministic, so the report is identical for any pool width."""
    missing = [r.region_id for r in bench if r.region_id not in predictions]
    for rid in missing:
        log.warning("no prediction for region %s; scoring empty description", rid)
    tasks: list[tuple[str, BenchQuestion]] = []
    for region in bench:
        description = predictions.get(region.region_id, "")
        for q in region.questions:
            tasks.append((description, q))
    if workers <= 1:
        results = [_safe_judge(judge, d, q) for d, q in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda t: _safe_judge(judge, t[0], t[1]), tasks))
    verdicts = {v.question_id: v for v in results}
    regions = [_assemble_region(region, verdicts) for region in bench]
    return ScoreReport(
        regions=regions,
        judge_meta=judge_meta or {},
        missing_predictions=missing,
    )
