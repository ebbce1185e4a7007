"""Matplotlib renderings written next to the machine-readable reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402


def render_bench_figure(report, path) -> Path:
    """Per-region positive/negative percentages plus the overall summary."""
    path = Path(path)
    regions = report.regions
    names = [r.region_id for r in regions]
    pos = [100.0 * r.pos_points / r.pos_max if r.pos_max else 0.0 for r in regions]
    neg = [100.0 * r.neg_points / r.neg_max if r.neg_max else 0.0 for r in regions]
    x = np.arange(len(names))
    fig, ax = plt.subplots(figsize=(max(6.0, 1.1 * len(names)), 4.0))
    ax.bar(x - 0.2, pos, width=0.4, label="positive %", color="#2a7fff")
    ax.bar(x + 0.2, neg, width=0.4, label="negative %", color="#ff7f2a")
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.axhline(report.avg_pct, color="green", linestyle="--", linewidth=1.0,
               label=f"avg {report.avg_pct:.1f}%")
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=30, ha="right")
    ax.set_ylabel("score (%)")
    ax.set_title(f"pos {report.pos_pct:.1f}%  neg {report.neg_pct:.1f}%  avg {report.avg_pct:.1f}%")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def render_training_figure(history, path) -> Path:
    """Loss and token-accuracy curves over optimizer steps."""
    path = Path(path)
    steps = [h.steps for h in history]
    fig, ax1 = plt.subplots(figsize=(6.5, 4.0))
    ax1.plot(steps, [h.loss for h in history], color="#d62728", label="loss")
    ax1.set_xlabel("optimizer steps")
    ax1.set_ylabel("loss", color="#d62728")
    ax2 = ax1.twinx()
    ax2.plot(steps, [h.token_accuracy for h in history], color="#2a7fff", label="token accuracy")
    ax2.set_ylabel("token accuracy", color="#2a7fff")
    ax2.set_ylim(0.0, 1.05)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def render_pipeline_figure(accepted_count: int, rejections, path) -> Path:
    """Acceptance vs rejection-reason histogram for a stage-2 run."""
    path = Path(path)
    counts: dict[str, int] = {"Accepted": accepted_count}
    for r in rejections:
        counts[r.reason] = counts.get(r.reason, 0) + 1
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    keys = list(counts)
    ax.bar(keys, [counts[k] for k in keys], color="#5a9bd4")
    ax.set_ylabel("regions")
    ax.set_title("stage-2 filtering outcome")
    for i, k in enumerate(keys):
        ax.text(i, counts[k], str(counts[k]), ha="center", va="bottom", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path
