"""Confidence-weighted category scores and the 0-100 composite."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from .errors import ConfigError, EmptyCategory
from .evaluators.results import GATE_ORDER, Category, EvaluatorResult, Stage

SCHEMA_VERSION = 1

DEFAULT_WEIGHTS = {
    Category.CORRECTNESS: 0.35,
    Category.PERFORMANCE: 0.15,
    Category.CODE: 0.15,
    Category.LIBRARY_SPECIFIC: 0.20,
    Category.APPROPRIATENESS: 0.15,
}


@dataclass(frozen=True)
class ScoringConfig:
    category_weights: Mapping[Category, float] = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))

    def __post_init__(self) -> None:
        weights = {Category(k): v for k, v in self.category_weights.items()}
        object.__setattr__(self, "category_weights", weights)
        self.validate()

    def validate(self) -> None:
        weights = self.category_weights
        missing = set(Category) - set(weights)
        if missing:
            raise ConfigError(f"missing weights for: {', '.join(sorted(c.value for c in missing))}")
        for cat, w in weights.items():
            if isinstance(w, bool) or not isinstance(w, (int, float)) or not math.isfinite(w) or w < 0:
                raise ConfigError(f"weight for {cat.value} must be a nonnegative number")
        total = math.fsum(weights.values())
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"category weights must sum to 1 (got {total!r})")

    @classmethod
    def from_dict(cls, data: Mapping[str, float]) -> ScoringConfig:
        try:
            return cls({Category(k): float(v) for k, v in data.items()})
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class CategoryScore:
    category: Category
    score: float
    contributing_evaluators: tuple[str, ...]
    total_confidence: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "category", Category(self.category))

    def to_dict(self) -> dict[str, Any]:
        return {
            "category": self.category.value,
            "score": self.score,
            "contributing_evaluators": list(self.contributing_evaluators),
            "total_confidence": self.total_confidence,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> CategoryScore:
        return cls(Category(data["category"]), float(data["score"]), tuple(data["contributing_evaluators"]),
                   float(data["total_confidence"]))


@dataclass
class CompositeReport:
    problem_id: str
    task_id: str
    gate_failed: bool
    composite: float
    category_scores: list[CategoryScore]
    evaluator_results: list[EvaluatorResult]
    failed_gate: str | None = None
    failure_reason: str | None = None
    gates: dict[str, str] = field(default_factory=dict)
    excluded: list[dict[str, str]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    agent: str = ""
    run_index: int = 0
    started_at: str | None = None
    finished_at: str | None = None

    def category(self, category: Category | str) -> CategoryScore | None:
        category = Category(category)
        for cs in self.category_scores:
            if cs.category is category:
                return cs
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "agent": self.agent,
            "problem_id": self.problem_id,
            "task_id": self.task_id,
            "run_index": self.run_index,
            "gate_failed": self.gate_failed,
            "failed_gate": self.failed_gate,
            "failure_reason": self.failure_reason,
            "gates": dict(self.gates),
            "composite": self.composite,
            "category_scores": [c.to_dict() for c in self.category_scores],
            "evaluator_results": [r.to_dict() for r in self.evaluator_results],
            "excluded": list(self.excluded),
            "warnings": list(self.warnings),
            "started_at": self.started_at,
            "finished_at": self.finished_at,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> CompositeReport:
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema_version {version!r}")
        return cls(
            problem_id=data["problem_id"],
            task_id=data.get("task_id", ""),
            gate_failed=bool(data["gate_failed"]),
            composite=float(data["composite"]),
            category_scores=[CategoryScore.from_dict(c) for c in data.get("category_scores", [])],
            evaluator_results=[EvaluatorResult.from_dict(r) for r in data.get("evaluator_results", [])],
            failed_gate=data.get("failed_gate"),
            failure_reason=data.get("failure_reason"),
            gates=dict(data.get("gates", {})),
            excluded=list(data.get("excluded", [])),
            warnings=list(data.get("warnings", [])),
            agent=data.get("agent", ""),
            run_index=int(data.get("run_index", 0)),
            started_at=data.get("started_at"),
            finished_at=data.get("finished_at"),
        )


def aggregate_category(results: Sequence[EvaluatorResult], category: Category | str) -> CategoryScore:
    """sum(conf * score) / sum(conf) over one category's results."""
    category = Category(category)
    if not results:
        raise EmptyCategory(f"no results for category {category.value}")
    for r in results:
        if r.category is not category:
            raise ValueError(f"{r.evaluator_id} belongs to {r.category.value}, not {category.value}")
    total_conf = math.fsum(r.confidence for r in results)
    score = math.fsum(r.confidence * r.score for r in results) / total_conf
    return CategoryScore(category, min(1.0, max(0.0, score)), tuple(r.evaluator_id for r in results), total_conf)


def gate_slots(results: Iterable[EvaluatorResult]) -> dict[str, str]:
    seen = {r.evaluator_id: r for r in results if r.stage is Stage.GATE}
    return {g: ("skipped" if g not in seen else "passed" if seen[g].passed else "failed") for g in GATE_ORDER}


def compose(
    results: Sequence[EvaluatorResult],
    config: ScoringConfig | None = None,
    *,
    problem_id: str = "",
    task_id: str = "",
    excluded: Sequence[dict[str, str]] = (),
    warnings: Sequence[str] = (),
    failure_reason: str | None = None,
) -> CompositeReport:
    """Gate short-circuit, then per-category aggregation and the weighted composite.

    Categories without any result drop out and their weight is spread
    proportionally over the populated ones.
    """
    config = config or ScoringConfig()
    config.validate()
    results = list(results)
    warnings = list(warnings)
    failed = [r for r in results if r.stage is Stage.GATE and not r.passed]
    slots = gate_slots(results)
    if failed or failure_reason is not None:
        first = min(failed, key=lambda r: GATE_ORDER.index(r.evaluator_id)).evaluator_id if failed else None
        return CompositeReport(
            problem_id=problem_id,
            task_id=task_id,
            gate_failed=True,
            composite=0.0,
            category_scores=[],
            evaluator_results=results,
            failed_gate=first,
            failure_reason=failure_reason or f"gate failed: {first}",
            gates=slots,
            excluded=list(excluded),
            warnings=warnings,
        )

    by_cat: dict[Category, list[EvaluatorResult]] = defaultdict(list)
    for r in results:
        by_cat[r.category].append(r)
    scores = [aggregate_category(by_cat[c], c) for c in Category if by_cat.get(c)]
    populated = {cs.category for cs in scores}
    for c in Category:
        if c not in populated:
            warnings.append(f"category {c.value} has no results; its weight is redistributed")
    weight_total = math.fsum(config.category_weights[c] for c in populated)
    if weight_total > 0:
        composite = 100.0 * math.fsum(config.category_weights[cs.category] * cs.score for cs in scores) / weight_total
    else:
        composite = 0.0
        warnings.append("no weighted category has results; composite is 0")
    return CompositeReport(
        problem_id=problem_id,
        task_id=task_id,
        gate_failed=False,
        composite=min(100.0, max(0.0, composite)),
        category_scores=scores,
        evaluator_results=results,
        gates=slots,
        excluded=list(excluded),
        warnings=warnings,
    )


def _mean(values: Sequence[float]) -> float | None:
    return math.fsum(values) / len(values) if values else None


GROUP_KEYS = {
    "agent": lambda r: (r.agent,),
    "problem": lambda r: (r.problem_id,),
    "agent_problem": lambda r: (r.agent, r.problem_id),
}


def summarize_runs(reports: Sequence[CompositeReport], group_by: str = "agent") -> list[dict[str, Any]]:
    """Per-group mean composite, gate pass rate and category means.

    Category means only use runs that passed every gate; a gate-failed run
    has no category scores to average.
    """
    if group_by not in GROUP_KEYS:
        raise ValueError(f"group_by must be one of {', '.join(GROUP_KEYS)}")
    key_fn = GROUP_KEYS[group_by]
    groups: dict[tuple[str, ...], list[CompositeReport]] = defaultdict(list)
    for r in reports:
        groups[key_fn(r)].append(r)
    rows = []
    for key in sorted(groups):
        runs = groups[key]
        passed = [r for r in runs if not r.gate_failed]
        cat_means = {}
        for c in Category:
            vals = [cs.score for r in passed if (cs := r.category(c)) is not None]
            mean = _mean(vals)
            if mean is not None:
                cat_means[c.value] = mean
        row: dict[str, Any] = {}
        if group_by in ("agent", "agent_problem"):
            row["agent"] = key[0]
        if group_by in ("problem", "agent_problem"):
            row["problem_id"] = key[-1]
        row.update({
            "runs": len(runs),
            "mean_composite": _mean([r.composite for r in runs]),
            "gate_pass_rate": len(passed) / len(runs),
            "category_means": cat_means,
            "zero_scores": sum(1 for r in runs if r.composite == 0.0),
            "scores_above_80": sum(1 for r in runs if r.composite > 80.0),
        })
        rows.append(row)
    return rows
