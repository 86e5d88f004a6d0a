"""The fourteen evaluators, grouped into gates, metrics and quality checks."""

from .gates import (
    CaseRun,
    attach_memcheck,
    gate_api_usage,
    gate_compilation,
    gate_execution,
    gate_memory_safety,
)
from .judge import HttpJudge, JudgeClient, JudgeVerdict, MockJudge, RateLimitedJudge, load_rubric
from .metrics import accuracy_score, metric_execution_time, metric_numerical_accuracy, relative_error, time_score
from .quality import quality_error_handling, quality_llm, quality_parallel_awareness
from .results import (
    EVALUATORS,
    GATE_ORDER,
    LLM_RUBRICS,
    METRIC_IDS,
    QUALITY_IDS,
    Category,
    EvaluatorResult,
    Stage,
)
from .rules import RuleSet, default_rules, load_rules

__all__ = [
    "EVALUATORS",
    "GATE_ORDER",
    "LLM_RUBRICS",
    "METRIC_IDS",
    "QUALITY_IDS",
    "CaseRun",
    "Category",
    "EvaluatorResult",
    "HttpJudge",
    "JudgeClient",
    "JudgeVerdict",
    "MockJudge",
    "RateLimitedJudge",
    "RuleSet",
    "Stage",
    "accuracy_score",
    "attach_memcheck",
    "default_rules",
    "gate_api_usage",
    "gate_compilation",
    "gate_execution",
    "gate_memory_safety",
    "load_rubric",
    "load_rules",
    "metric_execution_time",
    "metric_numerical_accuracy",
    "quality_error_handling",
    "quality_llm",
    "quality_parallel_awareness",
    "relative_error",
    "time_score",
]
