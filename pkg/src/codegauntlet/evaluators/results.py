"""Evaluator identities and the result record every evaluator returns."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any


class Stage(str, Enum):
    GATE = "gate"
    METRIC = "metric"
    QUALITY = "quality"


class Category(str, Enum):
    CORRECTNESS = "correctness"
    PERFORMANCE = "performance"
    CODE = "code"
    APPROPRIATENESS = "appropriateness"
    LIBRARY_SPECIFIC = "library_specific"


@dataclass(frozen=True)
class EvaluatorInfo:
    evaluator_id: str
    stage: Stage
    category: Category
    method: str
    confidence: float | None  # None: reported by the judge, or mode dependent


# Row order is pipeline order.
EVALUATORS: dict[str, EvaluatorInfo] = {
    info.evaluator_id: info
    for info in (
        EvaluatorInfo("compilation", Stage.GATE, Category.CORRECTNESS, "deterministic", 1.0),
        EvaluatorInfo("execution", Stage.GATE, Category.CORRECTNESS, "deterministic", 1.0),
        EvaluatorInfo("memory_safety", Stage.GATE, Category.CORRECTNESS, "runtime", None),
        EvaluatorInfo("api_usage", Stage.GATE, Category.LIBRARY_SPECIFIC, "deterministic", 1.0),
        EvaluatorInfo("numerical_accuracy", Stage.METRIC, Category.CORRECTNESS, "runtime", 1.0),
        EvaluatorInfo("execution_time", Stage.METRIC, Category.PERFORMANCE, "runtime", 1.0),
        EvaluatorInfo("readability", Stage.QUALITY, Category.CODE, "llm", None),
        EvaluatorInfo("code_style", Stage.QUALITY, Category.CODE, "llm+static", None),
        EvaluatorInfo("documentation", Stage.QUALITY, Category.CODE, "llm", None),
        EvaluatorInfo("algorithm_appropriateness", Stage.QUALITY, Category.APPROPRIATENESS, "llm", None),
        EvaluatorInfo("solver_choice", Stage.QUALITY, Category.APPROPRIATENESS, "llm+heuristic", None),
        EvaluatorInfo("best_practices", Stage.QUALITY, Category.LIBRARY_SPECIFIC, "llm+patterns", None),
        EvaluatorInfo("error_handling", Stage.QUALITY, Category.LIBRARY_SPECIFIC, "deterministic", 1.0),
        EvaluatorInfo("parallel_awareness", Stage.QUALITY, Category.LIBRARY_SPECIFIC, "deterministic", 0.8),
    )
}

GATE_ORDER = tuple(k for k, v in EVALUATORS.items() if v.stage is Stage.GATE)
METRIC_IDS = tuple(k for k, v in EVALUATORS.items() if v.stage is Stage.METRIC)
QUALITY_IDS = tuple(k for k, v in EVALUATORS.items() if v.stage is Stage.QUALITY)
LLM_RUBRICS = ("readability", "code_style", "documentation", "algorithm_appropriateness", "solver_choice",
               "best_practices")

MEMCHECK_CONFIDENCE = 1.0
HEURISTIC_MEMORY_CONFIDENCE = 0.7


@dataclass(frozen=True)
class EvaluatorResult:
    evaluator_id: str
    score: float
    confidence: float
    passed: bool = True
    evidence: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.evaluator_id not in EVALUATORS:
            raise ValueError(f"unknown evaluator {self.evaluator_id!r}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"{self.evaluator_id}: score {self.score} outside [0, 1]")
        if not 0.0 < self.confidence <= 1.0:
            raise ValueError(f"{self.evaluator_id}: confidence {self.confidence} outside (0, 1]")
        if self.stage is not Stage.GATE and not self.passed:
            raise ValueError(f"{self.evaluator_id}: only gates can fail")

    @property
    def info(self) -> EvaluatorInfo:
        return EVALUATORS[self.evaluator_id]

    @property
    def stage(self) -> Stage:
        return self.info.stage

    @property
    def category(self) -> Category:
        return self.info.category

    def to_dict(self) -> dict[str, Any]:
        return {
            "evaluator_id": self.evaluator_id,
            "stage": self.stage.value,
            "category": self.category.value,
            "score": self.score,
            "confidence": self.confidence,
            "passed": self.passed,
            "evidence": list(self.evidence),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> EvaluatorResult:
        return cls(data["evaluator_id"], float(data["score"]), float(data["confidence"]),
                   bool(data.get("passed", True)), tuple(data.get("evidence", ())))


def gate_result(evaluator_id: str, passed: bool, confidence: float, evidence: list[str] | tuple[str, ...]) -> EvaluatorResult:
    return EvaluatorResult(evaluator_id, 1.0 if passed else 0.0, confidence, passed, tuple(evidence))
