"""Library convention rule files.

Everything library-specific the static evaluators look for (init/finalize
symbols, header patterns, call prefixes, checking macros, collectives,
augmenter patterns) comes from a versioned JSON document. PETSc rules ship
as the default; pointing the harness at another file retargets it.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Any

from ..errors import RuleFileError

SUPPORTED_VERSIONS = ("1",)


@dataclass(frozen=True)
class ApiUsageRules:
    init_symbol: str
    finalize_symbol: str
    entry_function: str
    private_header_regex: str
    library_header_regex: str
    public_header_regex: str


@dataclass(frozen=True)
class ErrorHandlingRules:
    call_prefixes: tuple[str, ...]
    check_macros: tuple[str, ...]
    legacy_macros: tuple[str, ...]
    legacy_weight: float
    ignore_calls: tuple[str, ...]

    def is_library_call(self, name: str) -> bool:
        if name in self.check_macros or name in self.legacy_macros or name in self.ignore_calls:
            return False
        for prefix in self.call_prefixes:
            if name.startswith(prefix) and len(name) > len(prefix):
                nxt = name[len(prefix)]
                if nxt.isupper() or nxt.isdigit() or nxt == "_":
                    return True
        return False


@dataclass(frozen=True)
class ParallelRules:
    communicators: tuple[str, ...]
    rank_identifiers: tuple[str, ...]
    collective_calls: tuple[str, ...]
    print_calls: tuple[str, ...]


@dataclass(frozen=True)
class AugmenterPattern:
    id: str
    regex: str
    message: str
    absent: bool = False

    @cached_property
    def compiled(self) -> re.Pattern[str]:
        return re.compile(self.regex, re.MULTILINE)


@dataclass(frozen=True)
class RuleSet:
    version: str
    library: str
    source_suffixes: tuple[str, ...]
    api_usage: ApiUsageRules
    leak_signatures: tuple[str, ...]
    error_handling: ErrorHandlingRules
    parallel: ParallelRules
    augmenters: dict[str, tuple[AugmenterPattern, ...]]
    origin: str = "<memory>"


def _section(data: dict, key: str) -> dict:
    value = data.get(key)
    if not isinstance(value, dict):
        raise RuleFileError(f"rule file section {key!r} missing or not an object")
    return value


def _strings(section: dict, key: str, where: str) -> tuple[str, ...]:
    value = section.get(key)
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise RuleFileError(f"{where}.{key} must be a list of strings")
    return tuple(value)


def _regex(section: dict, key: str, where: str) -> str:
    value = section.get(key)
    if not isinstance(value, str):
        raise RuleFileError(f"{where}.{key} must be a string")
    try:
        re.compile(value)
    except re.error as exc:
        raise RuleFileError(f"{where}.{key}: bad regex ({exc})") from exc
    return value


def rules_from_dict(data: Any, origin: str = "<memory>") -> RuleSet:
    if not isinstance(data, dict):
        raise RuleFileError("rule file must be a JSON object")
    version = str(data.get("version", ""))
    if version not in SUPPORTED_VERSIONS:
        raise RuleFileError(f"unsupported rule file version {version!r}")
    api = _section(data, "api_usage")
    eh = _section(data, "error_handling")
    par = _section(data, "parallel")
    weight = eh.get("legacy_weight", 0.3)
    if isinstance(weight, bool) or not isinstance(weight, (int, float)) or not 0 <= weight <= 1:
        raise RuleFileError("error_handling.legacy_weight must be a number in [0, 1]")
    augmenters: dict[str, tuple[AugmenterPattern, ...]] = {}
    for rubric, patterns in (data.get("augmenters") or {}).items():
        items = []
        for p in patterns:
            try:
                pat = AugmenterPattern(p["id"], p["regex"], p["message"], bool(p.get("absent", False)))
                pat.compiled
            except (KeyError, TypeError, re.error) as exc:
                raise RuleFileError(f"augmenters.{rubric}: bad pattern entry {p!r} ({exc})") from exc
            items.append(pat)
        augmenters[rubric] = tuple(items)
    return RuleSet(
        version=version,
        library=str(data.get("library", "")),
        source_suffixes=tuple(data.get("source_suffixes", [".c", ".h"])),
        api_usage=ApiUsageRules(
            init_symbol=api.get("init_symbol", ""),
            finalize_symbol=api.get("finalize_symbol", ""),
            entry_function=api.get("entry_function", "main"),
            private_header_regex=_regex(api, "private_header_regex", "api_usage"),
            library_header_regex=_regex(api, "library_header_regex", "api_usage"),
            public_header_regex=_regex(api, "public_header_regex", "api_usage"),
        ),
        leak_signatures=_strings(_section(data, "memory"), "leak_signatures", "memory"),
        error_handling=ErrorHandlingRules(
            call_prefixes=_strings(eh, "call_prefixes", "error_handling"),
            check_macros=_strings(eh, "check_macros", "error_handling"),
            legacy_macros=_strings(eh, "legacy_macros", "error_handling"),
            legacy_weight=float(weight),
            ignore_calls=tuple(eh.get("ignore_calls", ())),
        ),
        parallel=ParallelRules(
            communicators=_strings(par, "communicators", "parallel"),
            rank_identifiers=_strings(par, "rank_identifiers", "parallel"),
            collective_calls=_strings(par, "collective_calls", "parallel"),
            print_calls=_strings(par, "print_calls", "parallel"),
        ),
        augmenters=augmenters,
        origin=origin,
    )


def load_rules(path: str | Path | None = None) -> RuleSet:
    """Load a rule file; ``None`` gives the bundled PETSc rules."""
    if path is None:
        res = resources.files("codegauntlet") / "data" / "rules" / "petsc.json"
        return rules_from_dict(json.loads(res.read_text(encoding="utf-8")), origin="builtin:petsc")
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise RuleFileError(f"{path}: {exc}") from exc
    return rules_from_dict(data, origin=str(path))


_DEFAULT: RuleSet | None = None


def default_rules() -> RuleSet:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_rules()
    return _DEFAULT
