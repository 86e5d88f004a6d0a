"""Stage 1: binary gates. Any failure ends the evaluation with a zero score."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import PurePosixPath
from typing import Callable, Sequence

from ..a2a import SubmissionArtifact
from ..problems import ProblemSpec, TestCase
from ..sandbox.client import ToolClient
from ..sandbox.core import ToolResult
from ..sandbox.profile import ToolchainProfile
from .clexer import CSource
from .results import HEURISTIC_MEMORY_CONFIDENCE, MEMCHECK_CONFIDENCE, EvaluatorResult, gate_result
from .rules import RuleSet, default_rules

MAX_EVIDENCE_CHARS = 4000

ResultHook = Callable[[TestCase, ToolResult], ToolResult]


@dataclass(frozen=True)
class CaseRun:
    """One test case's execution evidence."""

    case_id: str
    requested_ranks: int
    result: ToolResult
    memcheck: ToolResult | None = None

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "requested_ranks": self.requested_ranks,
            "result": self.result.to_dict(),
            "memcheck": None if self.memcheck is None else self.memcheck.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> CaseRun:
        mem = data.get("memcheck")
        return cls(data["case_id"], int(data["requested_ranks"]), ToolResult.from_dict(data["result"]),
                   None if mem is None else ToolResult.from_dict(mem))


def _clip(text: str) -> str:
    text = text.strip()
    if len(text) > MAX_EVIDENCE_CHARS:
        return text[:MAX_EVIDENCE_CHARS] + " ...[truncated]"
    return text


def case_args(artifact: SubmissionArtifact, case: TestCase) -> list[str]:
    # Case arguments come last so they win over the agent's own options.
    return list(artifact.run_args) + list(case.run_args)


def gate_compilation(artifact: SubmissionArtifact, tool_client: ToolClient) -> tuple[EvaluatorResult, ToolResult]:
    """Compile through the tool provider. SandboxError propagates unchanged."""
    files = [(f.name, f.content) for f in artifact.source_files]
    result = tool_client.compile(files, artifact.entry_point, artifact.dependencies)
    evidence = []
    if result.stderr.strip():
        evidence.append(_clip(result.stderr))
    if result.timed_out:
        evidence.append("compilation timed out")
    evidence.extend(result.warnings)
    if not result.ok and not evidence:
        evidence.append(f"compiler exited with status {result.exit_code}")
    return gate_result("compilation", result.ok, 1.0, evidence), result


def gate_execution(
    artifact: SubmissionArtifact,
    spec: ProblemSpec,
    session_id: str,
    tool_client: ToolClient,
    result_hook: ResultHook | None = None,
) -> tuple[EvaluatorResult, list[CaseRun]]:
    """Run every test case; passes only if all of them exit cleanly."""
    runs = []
    evidence = []
    for case in spec.test_cases:
        result = tool_client.run(session_id, case_args(artifact, case), case.mpi_ranks, case.timeout_seconds)
        if result_hook is not None:
            result = result_hook(case, result)
        runs.append(CaseRun(case.case_id, case.mpi_ranks, result))
        if result.timed_out:
            evidence.append(f"case {case.case_id}: timed out after {case.timeout_seconds:g}s")
        elif not result.ok:
            detail = _clip(result.stderr)
            evidence.append(f"case {case.case_id}: exit code {result.exit_code}" + (f": {detail}" if detail else ""))
        for w in result.warnings:
            evidence.append(f"case {case.case_id}: {w}")
    passed = all(r.result.ok for r in runs)
    return gate_result("execution", passed, 1.0, evidence), runs


def attach_memcheck(
    runs: Sequence[CaseRun],
    artifact: SubmissionArtifact,
    spec: ProblemSpec,
    session_id: str,
    tool_client: ToolClient,
) -> list[CaseRun]:
    """Re-run each case under the profile's memory checker.

    Kept separate from the timed runs so instrumentation never inflates the
    execution-time metric.
    """
    cases = {c.case_id: c for c in spec.test_cases}
    out = []
    for run in runs:
        case = cases[run.case_id]
        mem = tool_client.run(session_id, case_args(artifact, case), case.mpi_ranks,
                              case.timeout_seconds * 20, memcheck=True)
        out.append(CaseRun(run.case_id, run.requested_ranks, run.result, mem))
    return out


def gate_memory_safety(runs: Sequence[CaseRun], profile: ToolchainProfile, rules: RuleSet | None = None) -> EvaluatorResult:
    rules = rules or default_rules()
    evidence = []
    reports = [r.memcheck.memcheck_report if r.memcheck else None for r in runs]
    if profile.memcheck_available and runs and all(rep is not None for rep in reports):
        passed = True
        for run, rep in zip(runs, reports):
            assert rep is not None
            if not rep.clean:
                passed = False
                evidence.append(f"case {run.case_id}: leaked {rep.leaked_bytes} bytes, "
                                f"{rep.invalid_accesses} invalid accesses")
        evidence.append("mode: memcheck")
        return gate_result("memory_safety", passed, MEMCHECK_CONFIDENCE, evidence)

    passed = True
    for run in runs:
        streams = [run.result.stderr] + ([run.memcheck.stderr] if run.memcheck else [])
        for sig in rules.leak_signatures:
            if any(sig in s for s in streams):
                passed = False
                evidence.append(f"case {run.case_id}: stderr contains {sig!r}")
    evidence.append("mode: heuristic (no memory checker in profile)")
    return gate_result("memory_safety", passed, HEURISTIC_MEMORY_CONFIDENCE, evidence)


def c_sources(artifact: SubmissionArtifact, rules: RuleSet) -> list[CSource]:
    return [CSource(f.content, f.name) for f in artifact.source_files
            if PurePosixPath(f.name).suffix in rules.source_suffixes]


def gate_api_usage(artifact: SubmissionArtifact, rules: RuleSet | None = None) -> EvaluatorResult:
    """Structural API rules, evaluated on source text alone.

    R1: exactly one init and one finalize call in the entry function of the
        entry file, init first.
    R2: no private headers.
    R3: library headers only from the public allow-pattern.
    """
    rules = rules or default_rules()
    api = rules.api_usage
    evidence: list[str] = []

    entry = CSource(artifact.file(artifact.entry_point).content, artifact.entry_point)
    main = entry.function(api.entry_function)
    if main is None:
        evidence.append(f"R1: no {api.entry_function}() function in {artifact.entry_point}")
    else:
        calls = entry.calls(main)
        inits = [c for c in calls if c.name == api.init_symbol]
        finals = [c for c in calls if c.name == api.finalize_symbol]
        if len(inits) != 1:
            evidence.append(f"R1: expected exactly one {api.init_symbol} call in {api.entry_function}(), found {len(inits)}")
        if len(finals) != 1:
            evidence.append(f"R1: expected exactly one {api.finalize_symbol} call in {api.entry_function}(), found {len(finals)}")
        if len(inits) == 1 and len(finals) == 1 and inits[0].index > finals[0].index:
            evidence.append(f"R1: {api.finalize_symbol} (line {finals[0].line}) precedes {api.init_symbol} (line {inits[0].line})")

    private = re.compile(api.private_header_regex)
    library = re.compile(api.library_header_regex)
    public = re.compile(api.public_header_regex)
    for src in c_sources(artifact, rules):
        for inc in src.includes:
            if private.search(inc.path):
                evidence.append(f"R2: {src.name}:{inc.line} includes private header {inc.path}")
            elif library.search(inc.path) and not public.search(inc.path):
                evidence.append(f"R3: {src.name}:{inc.line} includes non-public library header {inc.path}")

    passed = not evidence
    if passed:
        evidence.append("R1-R3 satisfied")
    return gate_result("api_usage", passed, 1.0, evidence)
