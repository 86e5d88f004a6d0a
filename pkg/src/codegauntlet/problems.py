"""Benchmark problem specifications: loading, validation, output extraction.

A problem file is a JSON object::

    {
      "problem_id": "vec_norm",
      "problem_name": "Vector norm",
      "problem_description": "...",
      "difficulty": "easy",
      "module_tag": "Vec",
      "accuracy_tolerance": 1e-6,
      "time_thresholds": [1, 5, 15, 60],
      "test_cases": [
        {
          "case_id": "n100",
          "run_args": ["-n", "100"],
          "mpi_ranks": 1,
          "timeout_seconds": 120,
          "reference_values": [5050.0],
          "extraction_rule": [{"label": "sum", "pattern": "sum\\s*=\\s*(\\S+)"}]
        }
      ]
    }

``pattern`` is optional; when omitted a ``<label> = <number>`` pattern is
derived from the label.
"""

from __future__ import annotations

import functools
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import DuplicateId, ExtractionError, ParseError, SchemaError

DEFAULT_ACCURACY_TOLERANCE = 1e-6
DEFAULT_TIME_THRESHOLDS = (1.0, 5.0, 15.0, 60.0)
DEFAULT_MPI_RANKS = 1
DEFAULT_TIMEOUT_SECONDS = 120.0
DIFFICULTIES = ("easy", "medium", "hard")

NUMBER_RE = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"


@dataclass(frozen=True)
class HarnessDefaults:
    """Global fallbacks; values present in a problem file always win."""

    accuracy_tolerance: float = DEFAULT_ACCURACY_TOLERANCE
    time_thresholds: tuple[float, float, float, float] = DEFAULT_TIME_THRESHOLDS

    @classmethod
    def from_file(cls, path: str | Path) -> HarnessDefaults:
        data = _read_json(Path(path))
        tol = _positive_real(data.get("accuracy_tolerance", DEFAULT_ACCURACY_TOLERANCE), "accuracy_tolerance")
        thresholds = _thresholds(data.get("time_thresholds", DEFAULT_TIME_THRESHOLDS))
        return cls(tol, thresholds)


@dataclass(frozen=True)
class ExtractionPattern:
    label: str
    pattern: str

    @classmethod
    def of(cls, label: str) -> ExtractionPattern:
        """``label = <number>`` or ``label: <number>``."""
        return cls(label, default_pattern(label))


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # keep pytest from collecting this

    case_id: str
    run_args: tuple[str, ...]
    reference_values: tuple[float, ...]
    extraction_rule: tuple[ExtractionPattern, ...]
    mpi_ranks: int = DEFAULT_MPI_RANKS
    timeout_seconds: float = DEFAULT_TIMEOUT_SECONDS


@dataclass(frozen=True)
class ProblemSpec:
    problem_id: str
    problem_name: str
    problem_description: str
    test_cases: tuple[TestCase, ...]
    difficulty: str | None = None
    module_tag: str | None = None
    accuracy_tolerance: float = DEFAULT_ACCURACY_TOLERANCE
    time_thresholds: tuple[float, float, float, float] = DEFAULT_TIME_THRESHOLDS
    source_path: str | None = field(default=None, compare=False)


def default_pattern(label: str) -> str:
    # the lookbehind keeps label "a" from matching inside "ba = 1"
    return rf"(?<![\w.]){re.escape(label)}\s*[=:]\s*({NUMBER_RE})"


@functools.lru_cache(maxsize=256)
def _compile_pattern(pattern: str) -> re.Pattern[str]:
    return re.compile(pattern, re.MULTILINE)


def extract_output(stdout: str, rule: tuple[ExtractionPattern, ...] | list[ExtractionPattern]) -> list[float]:
    """Pull one real per labeled pattern out of ``stdout``, in rule order.

    When a label occurs several times the last occurrence wins, so programs
    that print intermediate iterates are scored on their final value.
    """
    values = []
    for item in rule:
        matches = list(_compile_pattern(item.pattern).finditer(stdout))
        if not matches:
            raise ExtractionError(f"label {item.label!r} not found in program output")
        raw = matches[-1].group(1)
        try:
            value = float(raw)
        except (TypeError, ValueError):
            raise ExtractionError(f"label {item.label!r}: {raw!r} is not a real number") from None
        if not math.isfinite(value):
            raise ExtractionError(f"label {item.label!r}: {raw!r} is not finite")
        values.append(value)
    return values


# -- loading ---------------------------------------------------------------

def _read_json(path: Path) -> Any:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: malformed JSON ({exc})") from exc


def _require(data: dict, key: str, prefix: str = "") -> Any:
    if key not in data:
        raise SchemaError(prefix + key, "required field missing")
    return data[key]


def _nonempty_str(value: Any, name: str) -> str:
    if not isinstance(value, str) or not value.strip():
        raise SchemaError(name, "must be a non-empty string")
    return value


def _positive_real(value: Any, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(name, "must be a number")
    if not math.isfinite(value) or value <= 0:
        raise SchemaError(name, "must be a positive finite number")
    return float(value)


def _thresholds(value: Any, name: str = "time_thresholds") -> tuple[float, float, float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 4:
        raise SchemaError(name, "must be a list of four numbers")
    ts = tuple(_positive_real(v, name) for v in value)
    if not all(a < b for a, b in zip(ts, ts[1:])):
        raise SchemaError(name, "must be strictly increasing (t1 < t2 < t3 < t4)")
    return ts  # type: ignore[return-value]


def _parse_rule(value: Any, name: str) -> tuple[ExtractionPattern, ...]:
    if isinstance(value, dict):
        value = [value]
    if not isinstance(value, list) or not value:
        raise SchemaError(name, "must be a non-empty list of {label, pattern} objects")
    items = []
    for i, entry in enumerate(value):
        where = f"{name}[{i}]"
        if isinstance(entry, str):
            entry = {"label": entry}
        if not isinstance(entry, dict):
            raise SchemaError(where, "must be an object with 'label' and optional 'pattern'")
        label = _nonempty_str(entry.get("label"), where + ".label")
        pattern = entry.get("pattern") or default_pattern(label)
        if not isinstance(pattern, str):
            raise SchemaError(where + ".pattern", "must be a string")
        try:
            compiled = _compile_pattern(pattern)
        except re.error as exc:
            raise SchemaError(where + ".pattern", f"invalid regular expression ({exc})") from exc
        if compiled.groups != 1:
            raise SchemaError(where + ".pattern", "must contain exactly one capture group")
        items.append(ExtractionPattern(label, pattern))
    return tuple(items)


def _parse_case(data: Any, idx: int) -> TestCase:
    prefix = f"test_cases[{idx}]."
    if not isinstance(data, dict):
        raise SchemaError(f"test_cases[{idx}]", "must be an object")
    case_id = _nonempty_str(_require(data, "case_id", prefix), prefix + "case_id")
    run_args = _require(data, "run_args", prefix)
    if not isinstance(run_args, list) or not all(isinstance(a, str) for a in run_args):
        raise SchemaError(prefix + "run_args", "must be a list of strings")
    refs = _require(data, "reference_values", prefix)
    if not isinstance(refs, list) or not refs:
        raise SchemaError(prefix + "reference_values", "must be a non-empty list of numbers")
    for v in refs:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise SchemaError(prefix + "reference_values", "entries must be finite numbers")
    rule = _parse_rule(_require(data, "extraction_rule", prefix), prefix + "extraction_rule")
    if len(rule) != len(refs):
        raise SchemaError(
            prefix + "extraction_rule",
            f"has {len(rule)} labels but reference_values has {len(refs)} entries",
        )
    ranks = data.get("mpi_ranks", DEFAULT_MPI_RANKS)
    if isinstance(ranks, bool) or not isinstance(ranks, int) or ranks < 1:
        raise SchemaError(prefix + "mpi_ranks", "must be a positive integer")
    timeout = _positive_real(data.get("timeout_seconds", DEFAULT_TIMEOUT_SECONDS), prefix + "timeout_seconds")
    return TestCase(
        case_id=case_id,
        run_args=tuple(run_args),
        reference_values=tuple(float(v) for v in refs),
        extraction_rule=rule,
        mpi_ranks=ranks,
        timeout_seconds=timeout,
    )


def problem_from_dict(data: Any, defaults: HarnessDefaults | None = None, source: str | None = None) -> ProblemSpec:
    defaults = defaults or HarnessDefaults()
    if not isinstance(data, dict):
        raise SchemaError("<root>", "problem file must contain a JSON object")
    problem_id = _nonempty_str(_require(data, "problem_id"), "problem_id")
    name = _nonempty_str(_require(data, "problem_name"), "problem_name")
    description = _nonempty_str(_require(data, "problem_description"), "problem_description")
    cases_raw = _require(data, "test_cases")
    if not isinstance(cases_raw, list) or not cases_raw:
        raise SchemaError("test_cases", "must be a non-empty list")
    cases = tuple(_parse_case(c, i) for i, c in enumerate(cases_raw))
    ids = [c.case_id for c in cases]
    if len(set(ids)) != len(ids):
        raise SchemaError("test_cases", "case_id values must be unique")

    difficulty = data.get("difficulty")
    if difficulty is not None and difficulty not in DIFFICULTIES:
        raise SchemaError("difficulty", f"must be one of {', '.join(DIFFICULTIES)}")
    module_tag = data.get("module_tag")
    if module_tag is not None and not isinstance(module_tag, str):
        raise SchemaError("module_tag", "must be a string")

    tol = data.get("accuracy_tolerance")
    tol = defaults.accuracy_tolerance if tol is None else _positive_real(tol, "accuracy_tolerance")
    thresholds = data.get("time_thresholds")
    thresholds = defaults.time_thresholds if thresholds is None else _thresholds(thresholds)

    return ProblemSpec(
        problem_id=problem_id,
        problem_name=name,
        problem_description=description,
        test_cases=cases,
        difficulty=difficulty,
        module_tag=module_tag,
        accuracy_tolerance=tol,
        time_thresholds=thresholds,
        source_path=source,
    )


def load_problem(path: str | Path, defaults: HarnessDefaults | None = None) -> ProblemSpec:
    path = Path(path)
    return problem_from_dict(_read_json(path), defaults, source=str(path))


def load_registry(directory: str | Path, defaults: HarnessDefaults | None = None) -> list[ProblemSpec]:
    """Load every ``*.json`` problem in ``directory``, sorted by filename."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ParseError(f"{directory}: not a directory")
    problems: list[ProblemSpec] = []
    seen: dict[str, Path] = {}
    for path in sorted(directory.glob("*.json"), key=lambda p: p.name):
        spec = load_problem(path, defaults)
        if spec.problem_id in seen:
            raise DuplicateId(f"problem_id {spec.problem_id!r} defined in both {seen[spec.problem_id].name} and {path.name}")
        seen[spec.problem_id] = path
        problems.append(spec)
    return problems


def problem_to_dict(spec: ProblemSpec) -> dict[str, Any]:
    """Serialize with every default materialized."""
    out: dict[str, Any] = {
        "problem_id": spec.problem_id,
        "problem_name": spec.problem_name,
        "problem_description": spec.problem_description,
        "accuracy_tolerance": spec.accuracy_tolerance,
        "time_thresholds": list(spec.time_thresholds),
        "test_cases": [
            {
                "case_id": c.case_id,
                "run_args": list(c.run_args),
                "mpi_ranks": c.mpi_ranks,
                "timeout_seconds": c.timeout_seconds,
                "reference_values": list(c.reference_values),
                "extraction_rule": [{"label": p.label, "pattern": p.pattern} for p in c.extraction_rule],
            }
            for c in spec.test_cases
        ],
    }
    if spec.difficulty is not None:
        out["difficulty"] = spec.difficulty
    if spec.module_tag is not None:
        out["module_tag"] = spec.module_tag
    return out
