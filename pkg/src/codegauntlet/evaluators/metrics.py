"""Stage 2: numerical accuracy and execution time scores."""

from __future__ import annotations

import math
from typing import Sequence

from ..errors import ExtractionError
from ..problems import ProblemSpec, extract_output
from .gates import CaseRun
from .results import EvaluatorResult

TIME_ANCHORS = (1.0, 0.8, 0.6, 0.2)


def relative_error(output: Sequence[float], reference: Sequence[float]) -> float:
    """Euclidean relative error; absolute norm when the reference is zero."""
    if len(output) != len(reference):
        raise ValueError("output and reference lengths differ")
    diff = math.sqrt(math.fsum((o - r) ** 2 for o, r in zip(output, reference)))
    ref_norm = math.sqrt(math.fsum(r * r for r in reference))
    return diff / ref_norm if ref_norm > 0 else diff


def accuracy_score(error: float, tolerance: float) -> float:
    return min(1.0, math.exp(-error / tolerance))


def time_score(t: float, thresholds: Sequence[float]) -> float:
    """Piecewise-linear time score through (t1,1.0) (t2,0.8) (t3,0.6) (t4,0.2), then 0.2*t4/t."""
    t1, t2, t3, t4 = thresholds
    if t <= t1:
        return 1.0
    if t > t4:
        return TIME_ANCHORS[3] * t4 / t
    knots = (t1, t2, t3, t4)
    for i in range(3):
        lo, hi = knots[i], knots[i + 1]
        if t <= hi:
            a, b = TIME_ANCHORS[i], TIME_ANCHORS[i + 1]
            # b - a is exact, so w == 1 lands exactly on b; each step is monotone under rounding
            return a + (b - a) * ((t - lo) / (hi - lo))
    raise AssertionError("unreachable")


def metric_numerical_accuracy(runs: Sequence[CaseRun], spec: ProblemSpec) -> EvaluatorResult:
    """Mean over test cases of min(1, exp(-err/tol))."""
    by_id = {r.case_id: r for r in runs}
    scores = []
    evidence = []
    for case in spec.test_cases:
        run = by_id.get(case.case_id)
        if run is None:
            scores.append(0.0)
            evidence.append(f"case {case.case_id}: no run recorded")
            continue
        try:
            values = extract_output(run.result.stdout, case.extraction_rule)
        except ExtractionError as exc:
            scores.append(0.0)
            evidence.append(f"case {case.case_id}: extraction failed: {exc}")
            continue
        err = relative_error(values, case.reference_values)
        s = accuracy_score(err, spec.accuracy_tolerance)
        scores.append(s)
        evidence.append(f"case {case.case_id}: output={values} reference={list(case.reference_values)} "
                        f"rel_err={err:.6g} score={s:.6f}")
    score = math.fsum(scores) / len(scores) if scores else 0.0
    return EvaluatorResult("numerical_accuracy", min(1.0, max(0.0, score)), 1.0, True, tuple(evidence))


def metric_execution_time(runs: Sequence[CaseRun], spec: ProblemSpec) -> EvaluatorResult:
    """The slowest case governs the score."""
    if not runs:
        return EvaluatorResult("execution_time", 0.0, 1.0, True, ("no runs recorded",))
    slowest = max(runs, key=lambda r: r.result.wall_time_seconds)
    t = slowest.result.wall_time_seconds
    s = time_score(t, spec.time_thresholds)
    evidence = (f"max wall time {t:.3f}s (case {slowest.case_id}); thresholds {list(spec.time_thresholds)}",)
    return EvaluatorResult("execution_time", s, 1.0, True, evidence)
