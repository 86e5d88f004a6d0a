"""Judge clients for the LLM-scored quality rubrics.

Request JSON: ``{rubric_id, rubric_text, problem_description, files}``;
response JSON: ``{score, confidence, rationale}``.
"""

from __future__ import annotations

import hashlib
import math
import os
import threading
from dataclasses import dataclass
from importlib import resources
from typing import Any, Mapping, Protocol, Sequence

import httpx

from ..errors import JudgeProtocolError

JUDGE_KEY_ENV = "CODEGAUNTLET_JUDGE_KEY"


@dataclass(frozen=True)
class JudgeVerdict:
    score: float
    confidence: float
    rationale: str = ""

    def __post_init__(self) -> None:
        for name in ("score", "confidence"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise JudgeProtocolError(f"judge {name} must be a finite number, got {value!r}")
        if not 0.0 <= self.score <= 1.0:
            raise JudgeProtocolError(f"judge score {self.score} outside [0, 1]")
        if not 0.0 < self.confidence <= 1.0:
            raise JudgeProtocolError(f"judge confidence {self.confidence} outside (0, 1]")

    @classmethod
    def from_dict(cls, data: Any) -> JudgeVerdict:
        if not isinstance(data, dict):
            raise JudgeProtocolError("judge verdict must be a JSON object")
        try:
            score, confidence = data["score"], data["confidence"]
        except KeyError as exc:
            raise JudgeProtocolError(f"judge verdict missing {exc.args[0]!r}") from None
        rationale = data.get("rationale", "")
        if not isinstance(rationale, str):
            raise JudgeProtocolError("judge rationale must be a string")
        return cls(score, confidence, rationale)


class JudgeClient(Protocol):
    def evaluate(self, rubric_id: str, rubric_text: str, problem_description: str,
                 source_files: Sequence[tuple[str, str]]) -> JudgeVerdict: ...


def load_rubric(rubric_id: str) -> str:
    res = resources.files("codegauntlet") / "data" / "rubrics" / f"{rubric_id}.txt"
    if not res.is_file():
        raise KeyError(f"no rubric named {rubric_id!r}")
    return res.read_text(encoding="utf-8")


class MockJudge:
    """Deterministic stand-in for an LLM judge.

    Pinned verdicts (rubric_id -> (score, confidence) or a raw dict) are
    returned as given and validated like any judge reply. Unpinned rubrics
    get a verdict derived from a hash of the rubric id and source text.
    """

    def __init__(self, pinned: Mapping[str, Any] | None = None):
        self.pinned = dict(pinned or {})
        self.calls: dict[str, int] = {}
        self._lock = threading.Lock()

    def evaluate(self, rubric_id, rubric_text, problem_description, source_files) -> JudgeVerdict:
        with self._lock:
            self.calls[rubric_id] = self.calls.get(rubric_id, 0) + 1
        if rubric_id in self.pinned:
            value = self.pinned[rubric_id]
            if isinstance(value, JudgeVerdict):
                return value
            if isinstance(value, dict):
                return JudgeVerdict.from_dict(value)
            score, confidence = value
            return JudgeVerdict(score, confidence, "pinned verdict")
        h = hashlib.sha256(rubric_id.encode())
        for name, content in source_files:
            h.update(b"\0" + name.encode() + b"\0" + content.encode())
        digest = h.digest()
        u1 = int.from_bytes(digest[:8], "big") / 2**64
        u2 = int.from_bytes(digest[8:16], "big") / 2**64
        return JudgeVerdict(round(0.4 + 0.6 * u1, 4), round(0.6 + 0.4 * u2, 4), "mock verdict")


class HttpJudge:
    """Posts rubric requests to a judge service speaking the JSON contract above."""

    def __init__(self, url: str, api_key: str | None = None, timeout: float = 120.0):
        self.url = url
        self.api_key = api_key if api_key is not None else os.environ.get(JUDGE_KEY_ENV)
        self.timeout = timeout

    def evaluate(self, rubric_id, rubric_text, problem_description, source_files) -> JudgeVerdict:
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        body = {
            "rubric_id": rubric_id,
            "rubric_text": rubric_text,
            "problem_description": problem_description,
            "files": [{"name": n, "content": c} for n, c in source_files],
        }
        try:
            resp = httpx.post(self.url, json=body, headers=headers, timeout=self.timeout)
            resp.raise_for_status()
            data = resp.json()
        except (httpx.HTTPError, ValueError) as exc:
            raise JudgeProtocolError(f"judge request failed: {exc}") from exc
        return JudgeVerdict.from_dict(data)


class RateLimitedJudge:
    """Caps the number of judge calls in flight."""

    def __init__(self, inner: JudgeClient, max_concurrent: int = 4):
        self.inner = inner
        self._sem = threading.BoundedSemaphore(max(1, max_concurrent))

    def evaluate(self, rubric_id, rubric_text, problem_description, source_files) -> JudgeVerdict:
        with self._sem:
            return self.inner.evaluate(rubric_id, rubric_text, problem_description, source_files)
