"""Reference-free benchmark scoring: fixtures, judges, scoring, reports."""

from .judges import (
    JUDGE_PROMPT_TEMPLATE,
    PROMPT_TEMPLATE_VERSION,
    JudgeEndpointConfig,
    JudgeFailure,
    JudgeVerdict,
    format_judge_prompt,
    http_transport,
    judge_metadata,
    make_llm_judge,
    mock_judge,
    parse_label,
)
from .model import (
    NEGATIVE,
    POSITIVE,
    BenchQuestion,
    BenchRegion,
    FixtureError,
    QuestionOption,
    load_bench,
    load_predictions,
)
from .report import report_csv, report_to_dict, write_atomic, write_report
from .scoring import QuestionScore, RegionScore, ScoreReport, score_region, score_run

__all__ = [
    "JUDGE_PROMPT_TEMPLATE",
    "NEGATIVE",
    "POSITIVE",
    "PROMPT_TEMPLATE_VERSION",
    "BenchQuestion",
    "BenchRegion",
    "FixtureError",
    "JudgeEndpointConfig",
    "JudgeFailure",
    "JudgeVerdict",
    "QuestionOption",
    "QuestionScore",
    "RegionScore",
    "ScoreReport",
    "format_judge_prompt",
    "http_transport",
    "judge_metadata",
    "load_bench",
    "load_predictions",
    "make_llm_judge",
    "mock_judge",
    "parse_label",
    "report_csv",
    "report_to_dict",
    "score_region",
    "score_run",
    "write_atomic",
    "write_report",
]
