"""Judges: a deterministic keyword-trigger mock and a chat-completions HTTP judge."""

from __future__ import annotations

import logging
import os
import re
from dataclasses import dataclass

from .model import BenchQuestion, FixtureError

log = logging.getLogger(__name__)

PROMPT_TEMPLATE_VERSION = "v1"

JUDGE_PROMPT_TEMPLATE = """You are grading a region description against one multiple-choice question.

Description:
{description}

Question: {question}

Options:
{options}

Answer with the single label of the one applicable option and nothing else."""


class JudgeFailure(RuntimeError):
    """Transport or protocol error while querying the judge endpoint."""


@dataclass
class JudgeVerdict:
    question_id: str
    chosen_label: str | None  # None marks the question as unanswered
    raw_response: str

    @property
    def unanswered(self) -> bool:
        return self.chosen_label is None


def mock_judge(description: str, question: BenchQuestion) -> JudgeVerdict:
    """Pick the first option (file order) whose trigger keywords all appear in the
    description (case-insensitive substring); otherwise the designated fallback."""
    hay = description.lower()
    for opt in question.options:
        kws = question.mock_triggers.get(opt.label)
        if kws and all(kw.lower() in hay for kw in kws):
            return JudgeVerdict(question.id, opt.label, f"mock: matched triggers for {opt.label}")
    if question.mock_fallback is None:
        raise FixtureError(f"question {question.id}: no trigger matched and no fallback designated")
    return JudgeVerdict(question.id, question.mock_fallback, "mock: fallback")


def parse_label(reply: str, labels: list[str]) -> str | None:
    """First option label appearing in the reply as a standalone token."""
    alts = "|".join(re.escape(l) for l in sorted(labels, key=len, reverse=True))
    m = re.search(rf"(?<![A-Za-z0-9])(?:{alts})(?![A-Za-z0-9])", reply)
    return m.group(0) if m else None


@dataclass
class JudgeEndpointConfig:
    url: str
    model: str = "judge"
    api_key_env: str = "DAMKIT_JUDGE_KEY"
    retries: int = 3
    timeout: float = 30.0
    retry_temperature: float = 0.7


def http_transport(cfg: JudgeEndpointConfig):
    """POST a chat-completions body and return choices[0].message.content."""
    import requests

    def send(payload: dict) -> str:
        key = os.environ.get(cfg.api_key_env)
        if not key:
            raise JudgeFailure(f"API key environment variable {cfg.api_key_env} is not set")
        try:
            resp = requests.post(
                cfg.url,
                json=payload,
                headers={"Authorization": f"Bearer {key}"},
                timeout=cfg.timeout,
            )
            resp.raise_for_status()
            body = resp.json()
            return str(body["choices"][0]["message"]["content"])
        except JudgeFailure:
            raise
        except Exception as e:  # connection, HTTP status, JSON shape
            raise JudgeFailure(f"judge endpoint error: {e}") from e

    return send


def format_judge_prompt(description: str, question: BenchQuestion) -> str:
    options = "\n".join(f"{o.label}. {o.text}" for o in question.options)
    return JUDGE_PROMPT_TEMPLATE.format(
        description=description, question=question.text, options=options
    )


def make_llm_judge(cfg: JudgeEndpointConfig, transport=None):
    """Judge callable backed by an HTTP endpoint; Unanswered after the retry budget.

    The first attempt samples at temperature 0; retries use
    ``cfg.retry_temperature`` for fresh sampling.
    """
    send = transport if transport is not None else http_transport(cfg)

    def judge(description: str, question: BenchQuestion) -> JudgeVerdict:
        prompt = format_judge_prompt(description, question)
        last = ""
        for attempt in range(cfg.retries):
            payload = {
                "model": cfg.model,
                "messages": [{"role": "user", "content": prompt}],
                "temperature": 0.0 if attempt == 0 else cfg.retry_temperature,
            }
            try:
                last = send(payload)
            except JudgeFailure as e:
                log.warning("judge attempt %d for %s failed: %s", attempt + 1, question.id, e)
                continue
            label = parse_label(last, question.labels)
            if label is not None:
                return JudgeVerdict(question.id, label, last)
            log.warning("judge reply for %s had no valid label (attempt %d)", question.id, attempt + 1)
        return JudgeVerdict(question.id, None, last)

    return judge


def judge_metadata(kind: str, cfg: JudgeEndpointConfig | None = None) -> dict:
    """Judge description embedded in every report for auditability."""
    meta = {"judge": kind, "prompt_version": PROMPT_TEMPLATE_VERSION}
    if cfg is not None:
        meta["model"] = cfg.model
        meta["url"] = cfg.url
        meta["retries"] = cfg.retries
    return meta
