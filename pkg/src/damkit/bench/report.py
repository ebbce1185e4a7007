"""Report serialization: audit-trail JSON, flat CSV, optional summary figure.

Files are written atomically (temp file in the target directory, then rename)
and all content is deterministic for a deterministic judge.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

from .scoring import ScoreReport


def report_to_dict(report: ScoreReport) -> dict:
    return {
        "judge": report.judge_meta,
        "missing_predictions": report.missing_predictions,
        "totals": {
            "pos_points": report.pos_points,
            "pos_max": report.pos_max,
            "neg_points": report.neg_points,
            "neg_max": report.neg_max,
            "pos_pct": report.pos_pct,
            "neg_pct": report.neg_pct,
            "avg_pct": report.avg_pct,
        },
        "regions": [
            {
                "region_id": r.region_id,
                "recognition_ok": r.recognition_ok,
                "pos_points": r.pos_points,
                "pos_max": r.pos_max,
                "neg_points": r.neg_points,
                "neg_max": r.neg_max,
                "questions": [
                    {
                        "question_id": q.question_id,
                        "kind": q.kind,
                        "is_recognition": q.is_recognition,
                        "chosen_label": q.chosen_label,
                        "raw_points": q.raw_points,
                        "contribution": q.contribution,
                        "max_points": q.max_points,
                        "unanswered": q.unanswered,
                        "raw_response": q.raw_response,
                    }
                    for q in r.questions
                ],
            }
            for r in report.regions
        ],
    }


def report_csv(report: ScoreReport) -> str:
    """One row per judged question: contribution points after gating."""
    lines = ["region_id,question_id,kind,label,points"]
    for r in report.regions:
        for q in r.questions:
            label = q.chosen_label if q.chosen_label is not None else "unanswered"
            lines.append(f"{r.region_id},{q.question_id},{q.kind},{label},{q.contribution:g}")
    return "\n".join(lines) + "\n"


def write_atomic(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_report(report: ScoreReport, json_path, figure: bool = True) -> dict[str, Path]:
    """Write <stem>.json, <stem>.csv and (optionally) <stem>.png; returns the paths."""
    json_path = Path(json_path)
    stem = json_path.with_suffix("")
    payload = json.dumps(report_to_dict(report), indent=2, sort_keys=True).encode()
    write_atomic(json_path, payload)
    csv_path = stem.with_suffix(".csv")
    write_atomic(csv_path, report_csv(report).encode())
    out = {"json": json_path, "csv": csv_path}
    if figure:
        from ..figures import render_bench_figure

        png_path = stem.with_suffix(".png")
        render_bench_figure(report, png_path)
        out["figure"] = png_path
    return out
