"""Drive evaluations end to end: dispatch, gates, metrics, quality, scoring."""

from __future__ import annotations

import logging
import traceback
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Callable, Sequence

from .a2a import SubmissionArtifact, TaskRequest, dispatch_task
from .errors import InfrastructureError, JudgeProtocolError, ProtocolError, SandboxError, TransportError
from .evaluators.gates import (
    CaseRun,
    ResultHook,
    attach_memcheck,
    gate_api_usage,
    gate_compilation,
    gate_execution,
    gate_memory_safety,
)
from .evaluators.judge import JudgeClient, RateLimitedJudge
from .evaluators.metrics import metric_execution_time, metric_numerical_accuracy
from .evaluators.quality import quality_error_handling, quality_llm, quality_parallel_awareness
from .evaluators.results import LLM_RUBRICS, EvaluatorResult
from .evaluators.rules import RuleSet, default_rules
from .problems import ProblemSpec, TestCase
from .sandbox.client import HttpToolClient, ToolClient
from .sandbox.core import ToolResult
from .sandbox.profile import ToolchainProfile
from .scoring import CompositeReport, ScoringConfig, compose

log = logging.getLogger(__name__)

NO_SUBMISSION = "no valid submission"


@dataclass
class EvaluationJob:
    spec: ProblemSpec
    agent_endpoint: str
    tools: str | ToolClient
    profile: ToolchainProfile
    judge: JudgeClient
    scoring: ScoringConfig = field(default_factory=ScoringConfig)
    repetitions: int = 3
    keep_artifacts: bool = False
    agent_name: str = "agent"
    rules: RuleSet | None = None
    deadline_seconds: float = 600.0
    judge_concurrency: int = 4
    # Test hooks: rewrite recorded run results (e.g. pin wall time) and
    # observe every evaluator invocation.
    result_hook: ResultHook | None = None
    observer: Callable[[str], None] | None = None

    def __post_init__(self) -> None:
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")

    def tool_client(self) -> ToolClient:
        return HttpToolClient(self.tools) if isinstance(self.tools, str) else self.tools


@dataclass
class RunRecord:
    agent: str
    problem_id: str
    run_index: int
    valid: bool
    report: CompositeReport | None
    submission: SubmissionArtifact | None = None
    failure: str | None = None
    compile_result: ToolResult | None = None
    case_runs: list[CaseRun] = field(default_factory=list)
    error: str | None = None

    @property
    def evaluator_results(self) -> list[EvaluatorResult]:
        return self.report.evaluator_results if self.report else []

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": 1,
            "agent": self.agent,
            "problem_id": self.problem_id,
            "run_index": self.run_index,
            "valid": self.valid,
            "error": self.error,
            "submission": self.submission.to_dict() if self.submission else None,
            "submission_failure": self.failure,
            "compile_result": self.compile_result.to_dict() if self.compile_result else None,
            "case_runs": [r.to_dict() for r in self.case_runs],
            "report": self.report.to_dict() if self.report else None,
        }


def pin_wall_time(seconds: float) -> ResultHook:
    """Result hook that replaces measured wall time with a fixed value."""
    def hook(case: TestCase, result: ToolResult) -> ToolResult:
        data = result.to_dict()
        data["wall_time_seconds"] = seconds
        return ToolResult.from_dict(data)
    return hook


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class _Run:
    """State for one evaluate_once call."""

    def __init__(self, job: EvaluationJob, run_index: int):
        self.job = job
        self.run_index = run_index
        self.rules = job.rules or default_rules()
        self.results: list[EvaluatorResult] = []
        self.excluded: list[dict[str, str]] = []
        self.warnings: list[str] = []

    def call(self, evaluator_id: str, fn: Callable[..., Any], *args: Any, **kwargs: Any) -> Any:
        if self.job.observer is not None:
            self.job.observer(evaluator_id)
        return fn(*args, **kwargs)

    def gather(self, pool: ThreadPoolExecutor, tasks: dict[str, tuple]) -> dict[str, Future]:
        return {eid: pool.submit(self.call, eid, *spec) for eid, spec in tasks.items()}


def evaluate_once(job: EvaluationJob, run_index: int = 0) -> RunRecord:
    """One dispatch plus the three evaluation stages.

    Raises InfrastructureError when the tool provider cannot be used; such a
    run is not scored.
    """
    state = _Run(job, run_index)
    spec = job.spec
    started = _now()
    req = TaskRequest(spec.problem_id, spec.problem_description, job.deadline_seconds)

    def finish(report: CompositeReport, **kw: Any) -> RunRecord:
        report.agent = job.agent_name
        report.run_index = run_index
        report.started_at = started
        report.finished_at = _now()
        return RunRecord(job.agent_name, spec.problem_id, run_index, True, report, **kw)

    try:
        artifact = dispatch_task(job.agent_endpoint, req)
    except (TransportError, ProtocolError) as exc:
        log.info("%s run %d: dispatch failed: %s", spec.problem_id, run_index, exc)
        report = compose([], job.scoring, problem_id=spec.problem_id, task_id=req.task_id,
                         warnings=[f"dispatch failed: {exc}"], failure_reason=NO_SUBMISSION)
        return finish(report, failure=f"{NO_SUBMISSION}: {exc}")

    tools = job.tool_client()
    judge = RateLimitedJudge(job.judge, job.judge_concurrency)
    session_id: str | None = None
    compile_result = None
    runs: list[CaseRun] = []

    def scored(**extra: Any) -> RunRecord:
        report = compose(state.results, job.scoring, problem_id=spec.problem_id, task_id=req.task_id,
                         excluded=state.excluded, warnings=state.warnings)
        return finish(report, submission=artifact, compile_result=compile_result, case_runs=runs, **extra)

    try:
        with ThreadPoolExecutor(max_workers=8) as pool:
            # Stage 1. API usage is static and has no precondition, so it
            # runs alongside compilation; the runtime gates are a chain.
            wave = state.gather(pool, {
                "compilation": (gate_compilation, artifact, tools),
                "api_usage": (gate_api_usage, artifact, state.rules),
            })
            compile_gate, compile_result = wave["compilation"].result()
            api_gate = wave["api_usage"].result()
            session_id = compile_result.session_id
            state.results += [compile_gate, api_gate]
            if not (compile_gate.passed and api_gate.passed):
                return scored()

            assert session_id is not None
            exec_gate, runs = state.call("execution", gate_execution, artifact, spec, session_id, tools,
                                         job.result_hook)
            state.results.append(exec_gate)
            if not exec_gate.passed:
                return scored()

            if job.profile.memcheck_available:
                runs = attach_memcheck(runs, artifact, spec, session_id, tools)
            mem_gate = state.call("memory_safety", gate_memory_safety, runs, job.profile, state.rules)
            state.results.append(mem_gate)
            if not mem_gate.passed:
                return scored()

            # Stage 2.
            metrics = state.gather(pool, {
                "numerical_accuracy": (metric_numerical_accuracy, runs, spec),
                "execution_time": (metric_execution_time, runs, spec),
            })
            state.results += [f.result() for f in metrics.values()]

            # Stage 3: only gates short-circuit, so this runs whatever the metrics say.
            tasks: dict[str, tuple] = {
                rubric: (quality_llm, rubric, spec, artifact, judge, state.rules) for rubric in LLM_RUBRICS
            }
            tasks["error_handling"] = (quality_error_handling, artifact, state.rules)
            tasks["parallel_awareness"] = (quality_parallel_awareness, artifact, runs, state.rules)
            for eid, fut in state.gather(pool, tasks).items():
                try:
                    state.results.append(fut.result())
                except JudgeProtocolError as exc:
                    state.excluded.append({"evaluator_id": eid, "reason": str(exc)})
                    state.warnings.append(f"{eid} excluded: {exc}")
            return scored()
    except SandboxError as exc:
        raise InfrastructureError(f"{spec.problem_id} run {run_index}: {exc}") from exc
    finally:
        if session_id is not None:
            try:
                tools.close_session(session_id, True if job.keep_artifacts else None)
            except SandboxError as exc:
                log.warning("could not close session %s: %s", session_id, exc)


def evaluate_suite(jobs: Sequence[EvaluationJob], parallelism: int = 1,
                   on_record: Callable[[RunRecord], None] | None = None) -> list[RunRecord]:
    """Run every job's repetitions; records come back in (job, run_index) order.

    An infrastructure failure marks that one record invalid and never stops
    the other runs.
    """
    units = [(job, i) for job in jobs for i in range(job.repetitions)]

    def work(job: EvaluationJob, idx: int) -> RunRecord:
        try:
            record = evaluate_once(job, idx)
        except InfrastructureError as exc:
            record = RunRecord(job.agent_name, job.spec.problem_id, idx, False, None, error=str(exc))
        except Exception as exc:  # isolate unexpected faults to their run
            log.error("unexpected failure in %s run %d:\n%s", job.spec.problem_id, idx, traceback.format_exc())
            record = RunRecord(job.agent_name, job.spec.problem_id, idx, False, None,
                               error=f"unexpected error: {exc!r}")
        if on_record is not None:
            on_record(record)
        return record

    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        futures = [pool.submit(work, job, idx) for job, idx in units]
        return [f.result() for f in futures]
