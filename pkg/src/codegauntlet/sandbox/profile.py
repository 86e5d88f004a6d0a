"""Toolchain profiles: how to compile and launch submitted code."""

from __future__ import annotations

import json
import os
import shlex
import string
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any

from ..errors import ProfileError

COMPILE_PLACEHOLDERS = {"sources", "output", "extra_flags"}
LAUNCH_PLACEHOLDERS = {"ranks", "binary", "args"}
MEMCHECK_PLACEHOLDERS = {"binary", "log"}

# Placeholders that expand to zero or more argv tokens rather than text.
LIST_PLACEHOLDERS = {"sources", "extra_flags", "args", "binary"}


@dataclass(frozen=True)
class ToolchainProfile:
    name: str
    compile_command_template: str
    run_launcher_template: str
    max_ranks: int = 1
    memcheck_available: bool = False
    memcheck_command_template: str | None = None
    include_dirs: tuple[str, ...] = ()
    lib_dirs: tuple[str, ...] = ()
    libs: tuple[str, ...] = ()
    env: dict[str, str] = field(default_factory=dict)
    source_suffixes: tuple[str, ...] = (".c",)
    compile_timeout_seconds: float = 120.0

    def __post_init__(self) -> None:
        _check_template(self.compile_command_template, COMPILE_PLACEHOLDERS, "compile_command_template")
        _check_template(self.run_launcher_template, LAUNCH_PLACEHOLDERS, "run_launcher_template")
        if self.memcheck_available:
            if not self.memcheck_command_template:
                raise ProfileError("memcheck_available requires memcheck_command_template")
            _check_template(self.memcheck_command_template, MEMCHECK_PLACEHOLDERS, "memcheck_command_template")
        if isinstance(self.max_ranks, bool) or not isinstance(self.max_ranks, int) or self.max_ranks < 1:
            raise ProfileError("max_ranks must be an integer >= 1")

    def extra_flags(self) -> list[str]:
        flags = [f"-I{d}" for d in self.include_dirs]
        flags += [f"-L{d}" for d in self.lib_dirs]
        flags += [f"-l{lib}" for lib in self.libs]
        return flags

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "compile_command_template": self.compile_command_template,
            "run_launcher_template": self.run_launcher_template,
            "max_ranks": self.max_ranks,
            "memcheck_available": self.memcheck_available,
            "memcheck_command_template": self.memcheck_command_template,
            "include_dirs": list(self.include_dirs),
            "lib_dirs": list(self.lib_dirs),
            "libs": list(self.libs),
            "env": dict(self.env),
            "source_suffixes": list(self.source_suffixes),
            "compile_timeout_seconds": self.compile_timeout_seconds,
        }


def _placeholders(template: str) -> set[str]:
    return {name for _, name, _, _ in string.Formatter().parse(template) if name}


def _check_template(template: str, required: set[str], what: str) -> None:
    try:
        found = _placeholders(template)
    except ValueError as exc:
        raise ProfileError(f"{what}: {exc}") from exc
    missing = required - found
    if missing:
        raise ProfileError(f"{what} is missing placeholders: {', '.join(sorted(missing))}")


def expand(template: str, **values: str | list[str]) -> list[str]:
    """Render a command template into argv.

    A token that is exactly ``{name}`` for a list-valued placeholder expands
    into that many tokens; every other token is formatted as text.
    """
    argv: list[str] = []
    for token in shlex.split(template):
        name = token[1:-1] if token.startswith("{") and token.endswith("}") else None
        if name in LIST_PLACEHOLDERS and name in values:
            value = values[name]
            argv.extend(value if isinstance(value, list) else [value])
            continue
        text_values = {k: (" ".join(v) if isinstance(v, list) else v) for k, v in values.items()}
        argv.append(token.format(**text_values))
    return argv


def profile_from_dict(data: dict[str, Any], base_dir: Path | None = None) -> ToolchainProfile:
    if not isinstance(data, dict):
        raise ProfileError("profile must be a JSON object")
    for key in ("name", "compile_command_template", "run_launcher_template"):
        if not isinstance(data.get(key), str):
            raise ProfileError(f"profile field {key!r} is required and must be a string")

    def dirs(key: str) -> tuple[str, ...]:
        out = []
        for d in data.get(key, []):
            d = os.path.expandvars(d)
            if base_dir is not None and not os.path.isabs(d):
                d = str((base_dir / d).resolve())
            out.append(d)
        return tuple(out)

    try:
        return ToolchainProfile(
            name=data["name"],
            compile_command_template=data["compile_command_template"],
            run_launcher_template=data["run_launcher_template"],
            max_ranks=data.get("max_ranks", 1),
            memcheck_available=bool(data.get("memcheck_available", False)),
            memcheck_command_template=data.get("memcheck_command_template"),
            include_dirs=dirs("include_dirs"),
            lib_dirs=dirs("lib_dirs"),
            libs=tuple(data.get("libs", [])),
            env={k: os.path.expandvars(str(v)) for k, v in data.get("env", {}).items()},
            source_suffixes=tuple(data.get("source_suffixes", [".c"])),
            compile_timeout_seconds=float(data.get("compile_timeout_seconds", 120.0)),
        )
    except (TypeError, ValueError) as exc:
        raise ProfileError(f"invalid profile: {exc}") from exc


def builtin_profiles() -> list[str]:
    root = resources.files("codegauntlet") / "data" / "profiles"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_profile(name_or_path: str | os.PathLike[str]) -> ToolchainProfile:
    """Load a profile from a JSON file, or by built-in name (e.g. ``plain-c``).

    Relative include/lib directories resolve against the profile file.
    """
    path = Path(name_or_path)
    if path.is_file():
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ProfileError(f"{path}: malformed JSON ({exc})") from exc
        return profile_from_dict(data, path.parent.resolve())
    res = resources.files("codegauntlet") / "data" / "profiles" / f"{name_or_path}.json"
    if not res.is_file():
        raise ProfileError(f"no profile file or built-in profile named {str(name_or_path)!r} (built-ins: {', '.join(builtin_profiles())})")
    return profile_from_dict(json.loads(res.read_text(encoding="utf-8")))


def with_include_dirs(profile: ToolchainProfile, *dirs: str) -> ToolchainProfile:
    return replace(profile, include_dirs=profile.include_dirs + tuple(dirs))
