"""Stage 3: quality assessments.

Six rubrics are judged (with optional static/heuristic augmentation); error
handling and parallel awareness are deterministic source checks.
"""

from __future__ import annotations

from typing import Sequence

from ..a2a import SubmissionArtifact
from ..problems import ProblemSpec
from .clexer import CSource
from .gates import CaseRun, c_sources
from .judge import JudgeClient, load_rubric
from .results import EVALUATORS, LLM_RUBRICS, EvaluatorResult
from .rules import AugmenterPattern, RuleSet, default_rules

AUGMENTED_RUBRICS = ("code_style", "solver_choice", "best_practices")


def augment(rubric_id: str, artifact: SubmissionArtifact, rules: RuleSet) -> list[str]:
    """Pattern findings for a rubric, as ``file:line: [id] message`` strings."""
    findings = []
    patterns: Sequence[AugmenterPattern] = rules.augmenters.get(rubric_id, ())
    sources = c_sources(artifact, rules)
    for pat in patterns:
        if pat.absent:
            if not any(pat.compiled.search(src.without_comments) for src in sources):
                findings.append(f"[{pat.id}] {pat.message}")
            continue
        for src in sources:
            # style checks look at raw text; everything else ignores comments
            text = src.text if rubric_id == "code_style" else src.without_comments
            for m in pat.compiled.finditer(text):
                line = text.count("\n", 0, m.start()) + 1
                findings.append(f"{src.name}:{line}: [{pat.id}] {pat.message}")
    return findings


def quality_llm(
    rubric_id: str,
    spec: ProblemSpec,
    artifact: SubmissionArtifact,
    judge: JudgeClient,
    rules: RuleSet | None = None,
    rubric_text: str | None = None,
) -> EvaluatorResult:
    """Score one rubric with the judge. JudgeProtocolError propagates to the caller."""
    if rubric_id not in LLM_RUBRICS:
        raise ValueError(f"{rubric_id!r} is not a judged rubric")
    rules = rules or default_rules()
    prompt = rubric_text if rubric_text is not None else load_rubric(rubric_id)
    findings = augment(rubric_id, artifact, rules) if rubric_id in AUGMENTED_RUBRICS else []
    if findings:
        prompt += "\n\nAutomated findings:\n" + "\n".join(f"- {f}" for f in findings)
    elif rubric_id in AUGMENTED_RUBRICS:
        prompt += "\n\nAutomated findings: none"
    files = [(f.name, f.content) for f in artifact.source_files]
    verdict = judge.evaluate(rubric_id, prompt, spec.problem_description, files)
    evidence = [f"judge: {verdict.rationale}"] if verdict.rationale else []
    evidence += [f"finding: {f}" for f in findings]
    return EvaluatorResult(rubric_id, float(verdict.score), float(verdict.confidence), True, tuple(evidence))


def error_handling_counts(artifact: SubmissionArtifact, rules: RuleSet) -> tuple[int, int, int, list[str]]:
    """Return (total, wrapped, legacy, unwrapped-site descriptions)."""
    eh = rules.error_handling
    checkers = frozenset(eh.check_macros) | frozenset(eh.legacy_macros)
    legacy_set = frozenset(eh.legacy_macros)
    total = wrapped = legacy = 0
    unwrapped: list[str] = []
    for src in c_sources(artifact, rules):
        for fn in src.functions:
            for call in src.calls(fn, checkers):
                if not call.statement_level or not eh.is_library_call(call.name):
                    continue
                total += 1
                if call.wrapper in eh.check_macros:
                    wrapped += 1
                elif call.wrapper in legacy_set or call.followed_by in legacy_set:
                    legacy += 1
                else:
                    unwrapped.append(f"{src.name}:{call.line}: {call.name}")
    return total, wrapped, legacy, unwrapped


def quality_error_handling(artifact: SubmissionArtifact, rules: RuleSet | None = None) -> EvaluatorResult:
    """Fraction of library callsites wrapped in the checking macro; legacy checks earn partial credit."""
    rules = rules or default_rules()
    total, wrapped, legacy, unwrapped = error_handling_counts(artifact, rules)
    if total == 0:
        return EvaluatorResult("error_handling", 0.0, 1.0, True, ("no library calls found",))
    weight = rules.error_handling.legacy_weight
    score = (wrapped + weight * legacy) / total
    evidence = [f"{total} library callsites: {wrapped} checked, {legacy} legacy-checked (weight {weight}), "
                f"{len(unwrapped)} unchecked"]
    evidence += [f"unchecked: {u}" for u in unwrapped[:50]]
    return EvaluatorResult("error_handling", min(1.0, score), 1.0, True, tuple(evidence))


def _rank_guarded_calls(src: CSource, rules: RuleSet, names: frozenset[str]) -> list[tuple[int, str]]:
    rank_ids = frozenset(rules.parallel.rank_identifiers)
    hits = []
    for fn in src.functions:
        for _, start, end in src.guarded_regions(rank_ids, fn):
            for call in src.calls(fn):
                if start <= call.index <= end and call.name in names:
                    hits.append((call.line, call.name))
    return sorted(set(hits))


def quality_parallel_awareness(
    artifact: SubmissionArtifact,
    runs: Sequence[CaseRun],
    rules: RuleSet | None = None,
) -> EvaluatorResult:
    """Four-item checklist; score is the fraction passed.

    C1 a communicator symbol is used; C2 no collective under a rank test;
    C3 no raw prints under a rank test when more than one rank is
    requested; C4 the sandbox honored every rank request.
    """
    rules = rules or default_rules()
    par = rules.parallel
    sources = c_sources(artifact, rules)
    evidence = []
    checks = {}

    comms = set(par.communicators)
    used = sorted(comms & set().union(*(s.identifiers() for s in sources))) if sources else []
    checks["C1"] = bool(used)
    evidence.append(f"C1 {'pass' if used else 'fail'}: communicator symbols used: {', '.join(used) or 'none'}")

    collectives = frozenset(par.collective_calls)
    c2_hits = [(s.name, line, name) for s in sources for line, name in _rank_guarded_calls(s, rules, collectives)]
    checks["C2"] = not c2_hits
    evidence.append("C2 pass: no rank-dependent collectives" if not c2_hits else
                    "C2 fail: " + "; ".join(f"{f}:{ln}: {n} under rank test" for f, ln, n in c2_hits))

    multi_rank = any(r.requested_ranks > 1 for r in runs)
    if multi_rank:
        prints = frozenset(par.print_calls)
        c3_hits = [(s.name, line, name) for s in sources for line, name in _rank_guarded_calls(s, rules, prints)]
        checks["C3"] = not c3_hits
        evidence.append("C3 pass: no rank-0-only raw output" if not c3_hits else
                        "C3 fail: " + "; ".join(f"{f}:{ln}: {n} under rank test" for f, ln, n in c3_hits))
    else:
        checks["C3"] = True
        evidence.append("C3 pass: single-rank problem")

    downgraded = [r.case_id for r in runs if r.result.downgraded]
    checks["C4"] = not downgraded
    evidence.append("C4 pass: rank requests honored" if not downgraded else
                    f"C4 fail: rank request downgraded by sandbox for case(s) {', '.join(downgraded)}")

    score = sum(checks.values()) / len(checks)
    return EvaluatorResult("parallel_awareness", score, EVALUATORS["parallel_awareness"].confidence or 0.8, True,
                           tuple(evidence))
