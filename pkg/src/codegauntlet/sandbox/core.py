"""Workspace sessions and the compile/run tools behind the tool server."""

from __future__ import annotations

import glob
import logging
import os
import re
import shutil
import signal
import subprocess
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath
from typing import Any, Sequence

from ..errors import SandboxError
from .profile import ToolchainProfile, expand

log = logging.getLogger(__name__)

OUTPUT_CAP_BYTES = 8 * 1024 * 1024
BASE_ENV = {"PATH": "/usr/local/bin:/usr/bin:/bin", "LANG": "C.UTF-8", "LC_ALL": "C.UTF-8"}
TIMEOUT_MARKER = "[sandbox] timed out"
DOWNGRADE_PREFIX = "rank downgrade"


@dataclass(frozen=True)
class MemcheckReport:
    leaked_bytes: int = 0
    invalid_accesses: int = 0

    @property
    def clean(self) -> bool:
        return self.leaked_bytes == 0 and self.invalid_accesses == 0


@dataclass(frozen=True)
class ToolResult:
    ok: bool
    exit_code: int
    stdout: str
    stderr: str
    wall_time_seconds: float
    timed_out: bool = False
    truncated: bool = False
    memcheck_report: MemcheckReport | None = None
    warnings: tuple[str, ...] = ()
    session_id: str | None = None
    ranks_used: int | None = None

    def __post_init__(self) -> None:
        if self.wall_time_seconds < 0:
            raise ValueError("wall_time_seconds must be nonnegative")
        if self.ok != (self.exit_code == 0 and not self.timed_out):
            raise ValueError("ok must equal (exit_code == 0 and not timed_out)")

    @property
    def downgraded(self) -> bool:
        return any(w.startswith(DOWNGRADE_PREFIX) for w in self.warnings)

    def to_dict(self) -> dict[str, Any]:
        report = self.memcheck_report
        return {
            "ok": self.ok,
            "exit_code": self.exit_code,
            "stdout": self.stdout,
            "stderr": self.stderr,
            "wall_time_seconds": self.wall_time_seconds,
            "timed_out": self.timed_out,
            "truncated": self.truncated,
            "memcheck_report": None if report is None else {
                "leaked_bytes": report.leaked_bytes, "invalid_accesses": report.invalid_accesses},
            "warnings": list(self.warnings),
            "session_id": self.session_id,
            "ranks_used": self.ranks_used,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ToolResult:
        report = data.get("memcheck_report")
        return cls(
            ok=bool(data["ok"]),
            exit_code=int(data["exit_code"]),
            stdout=data.get("stdout", ""),
            stderr=data.get("stderr", ""),
            wall_time_seconds=float(data.get("wall_time_seconds", 0.0)),
            timed_out=bool(data.get("timed_out", False)),
            truncated=bool(data.get("truncated", False)),
            memcheck_report=None if report is None else MemcheckReport(
                int(report["leaked_bytes"]), int(report["invalid_accesses"])),
            warnings=tuple(data.get("warnings", ())),
            session_id=data.get("session_id"),
            ranks_used=data.get("ranks_used"),
        )


@dataclass
class ProcessOutcome:
    exit_code: int
    stdout: str
    stderr: str
    wall_time_seconds: float
    timed_out: bool
    truncated: bool


def _drain(stream, sink: bytearray, cap: int, overflow: list[bool]) -> None:
    for chunk in iter(lambda: stream.read(65536), b""):
        room = cap - len(sink)
        if room > 0:
            sink += chunk[:room]
        if len(chunk) > room:
            overflow[0] = True
    stream.close()


def run_process(
    argv: Sequence[str],
    cwd: str | os.PathLike[str],
    env: dict[str, str],
    timeout: float,
    output_cap: int = OUTPUT_CAP_BYTES,
) -> ProcessOutcome:
    """Run ``argv`` in its own process group with a wall-clock timeout.

    Each stream keeps at most ``output_cap`` bytes; the rest is drained and
    discarded so the child never blocks on a full pipe.
    """
    start = time.perf_counter()
    try:
        proc = subprocess.Popen(
            list(argv), cwd=cwd, env=env, stdin=subprocess.DEVNULL,
            stdout=subprocess.PIPE, stderr=subprocess.PIPE, start_new_session=True,
        )
    except OSError as exc:
        raise SandboxError(f"cannot launch {argv[0]!r}: {exc}") from exc
    out, err = bytearray(), bytearray()
    out_over, err_over = [False], [False]
    readers = [
        threading.Thread(target=_drain, args=(proc.stdout, out, output_cap, out_over), daemon=True),
        threading.Thread(target=_drain, args=(proc.stderr, err, output_cap, err_over), daemon=True),
    ]
    for r in readers:
        r.start()
    timed_out = False
    try:
        proc.wait(timeout=timeout)
    except subprocess.TimeoutExpired:
        timed_out = True
        try:
            os.killpg(proc.pid, signal.SIGKILL)
        except ProcessLookupError:
            pass
        proc.wait()
    wall = time.perf_counter() - start
    # Orphaned grandchildren can hold the pipes open; reap the whole group.
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        pass
    for r in readers:
        r.join(timeout=5)
    stderr = err.decode("utf-8", errors="replace")
    if timed_out:
        stderr += f"\n{TIMEOUT_MARKER} after {timeout:g}s\n"
    return ProcessOutcome(
        exit_code=proc.returncode,
        stdout=out.decode("utf-8", errors="replace"),
        stderr=stderr,
        wall_time_seconds=wall,
        timed_out=timed_out,
        truncated=out_over[0] or err_over[0],
    )


_SUMMARY_RE = re.compile(r"(definitely|indirectly) lost:\s*([\d,]+) bytes")
# "64 bytes in 1 blocks are definitely lost" or
# "72 (8 direct, 64 indirect) bytes in 2 blocks are definitely lost"
_RECORD_RE = re.compile(
    r"([\d,]+) (?:\(([\d,]+) direct, [\d,]+ indirect\) )?bytes in [\d,]+ blocks are (definitely|indirectly) lost")
_INVALID_RE = re.compile(r"^==\d+==\s+(Invalid (read|write|free)|Mismatched free|Source and destination overlap)", re.M)


def _num(text: str) -> int:
    return int(text.replace(",", ""))


def _leaked_bytes(text: str) -> int:
    # --quiet drops the summary, so fall back to the per-record lines; the
    # direct part of a definitely-lost record excludes blocks that get their
    # own indirectly-lost record
    summary = _SUMMARY_RE.findall(text)
    if summary:
        return sum(_num(n) for _, n in summary)
    total = 0
    for m in _RECORD_RE.finditer(text):
        total += _num(m.group(2) or m.group(1))
    return total


def parse_valgrind_logs(paths: Sequence[str]) -> MemcheckReport:
    leaked = invalid = 0
    for path in paths:
        text = Path(path).read_text(encoding="utf-8", errors="replace")
        leaked += _leaked_bytes(text)
        invalid += len(_INVALID_RE.findall(text))
    return MemcheckReport(leaked, invalid)


_DEP_RE = re.compile(r"^(?:-l)?([A-Za-z0-9_+.-]+)$")


def dependency_flags(dependencies: Sequence[str]) -> tuple[list[str], list[str]]:
    """Map agent-supplied dependency hints to link flags.

    Only bare library names (``m``, ``-lm``) are honored; anything else is
    reported back as a warning instead of reaching the compiler command.
    """
    flags, warnings = [], []
    for dep in dependencies:
        m = _DEP_RE.match(dep.strip())
        if m and not m.group(1).startswith("-"):
            flags.append(f"-l{m.group(1)}")
        else:
            warnings.append(f"ignored dependency hint {dep!r}")
    return flags, warnings


@dataclass
class _Session:
    session_id: str
    root: Path
    lock: threading.Lock = field(default_factory=threading.Lock)
    binary: Path | None = None

    @property
    def src(self) -> Path:
        return self.root / "src"


class SandboxService:
    """Compile and run submissions in per-session workspace directories."""

    def __init__(self, profile: ToolchainProfile, workdir: str | os.PathLike[str], keep_artifacts: bool = False,
                 output_cap: int = OUTPUT_CAP_BYTES):
        self.profile = profile
        self.workdir = Path(workdir)
        self.keep_artifacts = keep_artifacts
        self.output_cap = output_cap
        self._sessions: dict[str, _Session] = {}
        self._lock = threading.Lock()
        try:
            self.workdir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise SandboxError(f"cannot create workdir {self.workdir}: {exc}") from exc

    def _env(self, session: _Session) -> dict[str, str]:
        tmp = session.root / "tmp"
        tmp.mkdir(exist_ok=True)
        env = dict(BASE_ENV, HOME=str(session.root), TMPDIR=str(tmp))
        env.update(self.profile.env)
        return env

    def open_session(self) -> str:
        session_id = uuid.uuid4().hex
        root = self.workdir / session_id
        try:
            root.mkdir(parents=True)
            (root / "src").mkdir()
            (root / "run").mkdir()
        except OSError as exc:
            raise SandboxError(f"cannot create workspace: {exc}") from exc
        with self._lock:
            self._sessions[session_id] = _Session(session_id, root)
        return session_id

    def _session(self, session_id: str) -> _Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise SandboxError(f"unknown session {session_id!r}")
        return session

    def workspace(self, session_id: str) -> Path:
        return self._session(session_id).root

    def close_session(self, session_id: str, keep: bool | None = None) -> None:
        with self._lock:
            session = self._sessions.pop(session_id, None)
        if session is None:
            return
        keep = self.keep_artifacts if keep is None else keep
        if not keep:
            shutil.rmtree(session.root, ignore_errors=True)

    def compile(
        self,
        files: Sequence[tuple[str, str]],
        entry_point: str,
        dependencies: Sequence[str] = (),
        session_id: str | None = None,
    ) -> ToolResult:
        names = [name for name, _ in files]
        if entry_point not in names:
            raise SandboxError(f"entry point {entry_point!r} is not among the uploaded files")
        for name in names:
            p = PurePosixPath(name)
            if not name or p.is_absolute() or ".." in p.parts:
                raise SandboxError(f"refusing unsafe filename {name!r}")
        if session_id is None:
            session_id = self.open_session()
        session = self._session(session_id)
        with session.lock:
            shutil.rmtree(session.src, ignore_errors=True)
            try:
                session.src.mkdir()
                for name, content in files:
                    target = session.src / name
                    target.parent.mkdir(parents=True, exist_ok=True)
                    target.write_text(content, encoding="utf-8")
            except OSError as exc:
                raise SandboxError(f"cannot write workspace files: {exc}") from exc
            session.binary = None

            sources = [entry_point] + [
                n for n in names if n != entry_point and PurePosixPath(n).suffix in self.profile.source_suffixes
            ]
            dep_flags, warnings = dependency_flags(dependencies)
            output = session.root / "build" / "program"
            output.parent.mkdir(exist_ok=True)
            argv = expand(
                self.profile.compile_command_template,
                sources=sources,
                output=str(output),
                extra_flags=[f"-I{session.src}"] + self.profile.extra_flags() + dep_flags,
            )
            outcome = run_process(argv, session.src, self._env(session), self.profile.compile_timeout_seconds,
                                  self.output_cap)
            ok = outcome.exit_code == 0 and not outcome.timed_out
            if ok and output.exists():
                session.binary = output
            elif ok:
                ok = False
                outcome.exit_code = 1
                outcome.stderr += "\n[sandbox] compiler reported success but produced no binary\n"
            return ToolResult(
                ok=ok,
                exit_code=outcome.exit_code,
                stdout=outcome.stdout,
                stderr=outcome.stderr,
                wall_time_seconds=outcome.wall_time_seconds,
                timed_out=outcome.timed_out,
                truncated=outcome.truncated,
                warnings=tuple(warnings),
                session_id=session_id,
            )

    def run(
        self,
        session_id: str,
        args: Sequence[str] = (),
        ranks: int = 1,
        timeout_seconds: float = 120.0,
        memcheck: bool = False,
    ) -> ToolResult:
        session = self._session(session_id)
        if ranks < 1:
            raise SandboxError("ranks must be >= 1")
        with session.lock:
            if session.binary is None:
                raise SandboxError(f"session {session_id!r} has no successfully compiled binary")
            warnings = []
            used = ranks
            if ranks > self.profile.max_ranks:
                used = self.profile.max_ranks
                warnings.append(f"{DOWNGRADE_PREFIX}: requested {ranks} ranks, profile {self.profile.name!r} allows {used}")
            binary: str | list[str] = str(session.binary)
            log_stem = None
            if memcheck:
                if self.profile.memcheck_available:
                    log_stem = session.root / "run" / f"memcheck-{uuid.uuid4().hex[:8]}"
                    binary = expand(self.profile.memcheck_command_template or "", binary=str(session.binary),
                                    log=str(log_stem))
                else:
                    warnings.append("memcheck requested but unavailable in this profile")
            argv = expand(self.profile.run_launcher_template, ranks=str(used), binary=binary, args=list(args))
            outcome = run_process(argv, session.root / "run", self._env(session), timeout_seconds, self.output_cap)
            report = None
            if log_stem is not None:
                logs = sorted(glob.glob(f"{log_stem}.*"))
                report = parse_valgrind_logs(logs) if logs else None
                if report is None:
                    warnings.append("memcheck produced no log")
            return ToolResult(
                ok=outcome.exit_code == 0 and not outcome.timed_out,
                exit_code=outcome.exit_code,
                stdout=outcome.stdout,
                stderr=outcome.stderr,
                wall_time_seconds=outcome.wall_time_seconds,
                timed_out=outcome.timed_out,
                truncated=outcome.truncated,
                memcheck_report=report,
                warnings=tuple(warnings),
                session_id=session_id,
                ranks_used=used,
            )

    def close(self) -> None:
        with self._lock:
            ids = list(self._sessions)
        for sid in ids:
            self.close_session(sid)
