"""Task/artifact exchange with a code-generating agent.

Wire contract: ``POST /a2a/tasks`` with a task request JSON body; the agent
answers 200 with a submission artifact JSON body, or 4xx with
``{"error": "..."}``.
"""

from __future__ import annotations

import json
import logging
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from concurrent.futures import TimeoutError as FutureTimeout
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath
from typing import Any, Mapping

import httpx

from ._http import JSONHandler, ServerHandle, bind_server
from .errors import ProtocolError, TransportError

log = logging.getLogger(__name__)

TASKS_PATH = "/a2a/tasks"
GRACE_SECONDS = 2.0
MAX_FILE_BYTES = 1024 * 1024
MAX_FILES = 20


@dataclass(frozen=True)
class TaskRequest:
    problem_id: str
    problem_description: str
    deadline_seconds: float = 600.0
    task_id: str = field(default_factory=lambda: str(uuid.uuid4()))

    def to_dict(self) -> dict[str, Any]:
        return {
            "task_id": self.task_id,
            "problem_id": self.problem_id,
            "problem_description": self.problem_description,
            "deadline_seconds": self.deadline_seconds,
        }

    @classmethod
    def from_dict(cls, data: Any) -> TaskRequest:
        if not isinstance(data, dict):
            raise ProtocolError("task request must be a JSON object")
        try:
            task_id, problem_id = data["task_id"], data["problem_id"]
            description = data["problem_description"]
        except KeyError as exc:
            raise ProtocolError(f"task request missing {exc.args[0]!r}") from None
        deadline = data.get("deadline_seconds", 600.0)
        if not all(isinstance(v, str) for v in (task_id, problem_id, description)):
            raise ProtocolError("task_id, problem_id and problem_description must be strings")
        if isinstance(deadline, bool) or not isinstance(deadline, (int, float)) or deadline <= 0:
            raise ProtocolError("deadline_seconds must be a positive number")
        return cls(problem_id, description, float(deadline), task_id)


@dataclass(frozen=True)
class SourceFile:
    name: str
    content: str


@dataclass(frozen=True)
class SubmissionArtifact:
    """Source files plus run metadata returned by the model under test.

    Construction validates; there is no other way to obtain an instance, so
    artifacts built locally and artifacts decoded from the wire pass through
    the same checks.
    """

    task_id: str
    source_files: tuple[SourceFile, ...]
    entry_point: str
    dependencies: tuple[str, ...] = ()
    run_args: tuple[str, ...] = ()
    notes: str | None = None

    def __post_init__(self) -> None:
        validate_artifact(self)

    @property
    def filenames(self) -> list[str]:
        return [f.name for f in self.source_files]

    def file(self, name: str) -> SourceFile:
        for f in self.source_files:
            if f.name == name:
                return f
        raise KeyError(name)

    def with_task_id(self, task_id: str) -> SubmissionArtifact:
        return SubmissionArtifact(task_id, self.source_files, self.entry_point, self.dependencies, self.run_args, self.notes)

    def to_dict(self) -> dict[str, Any]:
        return {
            "task_id": self.task_id,
            "source_files": [{"name": f.name, "content": f.content} for f in self.source_files],
            "entry_point": self.entry_point,
            "dependencies": list(self.dependencies),
            "run_args": list(self.run_args),
            "notes": self.notes,
        }

    @classmethod
    def from_dict(cls, data: Any) -> SubmissionArtifact:
        if not isinstance(data, dict):
            raise ProtocolError("artifact must be a JSON object")
        for key in ("task_id", "source_files", "entry_point"):
            if key not in data:
                raise ProtocolError(f"artifact missing {key!r}")
        files = data["source_files"]
        if not isinstance(files, list):
            raise ProtocolError("source_files must be an array")
        parsed = []
        for entry in files:
            if not isinstance(entry, dict) or not isinstance(entry.get("name"), str) or not isinstance(entry.get("content"), str):
                raise ProtocolError("each source file must be an object with string 'name' and 'content'")
            parsed.append(SourceFile(entry["name"], entry["content"]))
        deps = data.get("dependencies") or []
        args = data.get("run_args") or []
        if not isinstance(deps, list) or not all(isinstance(d, str) for d in deps):
            raise ProtocolError("dependencies must be an array of strings")
        if not isinstance(args, list) or not all(isinstance(a, str) for a in args):
            raise ProtocolError("run_args must be an array of strings")
        notes = data.get("notes")
        if notes is not None and not isinstance(notes, str):
            raise ProtocolError("notes must be a string")
        if not isinstance(data["task_id"], str) or not isinstance(data["entry_point"], str):
            raise ProtocolError("task_id and entry_point must be strings")
        return cls(data["task_id"], tuple(parsed), data["entry_point"], tuple(deps), tuple(args), notes)


def _check_filename(name: str) -> None:
    if not name or "\\" in name or "\x00" in name:
        raise ProtocolError(f"invalid filename {name!r}")
    path = PurePosixPath(name)
    if path.is_absolute():
        raise ProtocolError(f"filename {name!r} must be relative")
    # split by hand: PurePosixPath drops "." parts and collapses "//"
    if any(part in ("..", ".", "") for part in name.split("/")):
        raise ProtocolError(f"filename {name!r} must not contain '..' or '.' components")


def validate_artifact(artifact: SubmissionArtifact) -> None:
    if not isinstance(artifact.task_id, str):
        raise ProtocolError("task_id must be a string")
    files = artifact.source_files
    if not files:
        raise ProtocolError("source_files must not be empty")
    if len(files) > MAX_FILES:
        raise ProtocolError(f"too many source files ({len(files)} > {MAX_FILES})")
    names = set()
    for f in files:
        _check_filename(f.name)
        if f.name in names:
            raise ProtocolError(f"duplicate filename {f.name!r}")
        names.add(f.name)
        if len(f.content.encode("utf-8")) > MAX_FILE_BYTES:
            raise ProtocolError(f"{f.name!r} exceeds {MAX_FILE_BYTES} bytes")
    if artifact.entry_point not in names:
        raise ProtocolError(f"entry_point {artifact.entry_point!r} is not one of the source files")


# -- client ----------------------------------------------------------------

def _post_task(url: str, req: TaskRequest) -> httpx.Response:
    with httpx.Client(timeout=req.deadline_seconds + GRACE_SECONDS) as client:
        return client.post(url, json=req.to_dict())


def dispatch_task(agent_endpoint: str, req: TaskRequest) -> SubmissionArtifact:
    """Send one task to an agent and return its validated artifact.

    Never blocks longer than ``req.deadline_seconds`` plus a fixed grace.
    """
    url = agent_endpoint.rstrip("/")
    if not url.endswith(TASKS_PATH):
        url += TASKS_PATH
    pool = ThreadPoolExecutor(max_workers=1)
    future = pool.submit(_post_task, url, req)
    late = f"{url}: no response within deadline {req.deadline_seconds}s + {GRACE_SECONDS}s grace"
    try:
        # the client timeout normally fires first; this is the hard backstop
        resp = future.result(timeout=req.deadline_seconds + GRACE_SECONDS + 0.5)
    except FutureTimeout:
        raise TransportError(late) from None
    except httpx.TimeoutException as exc:
        raise TransportError(late) from exc
    except httpx.HTTPError as exc:
        raise TransportError(f"{url}: {exc}") from exc
    finally:
        pool.shutdown(wait=False)

    try:
        body = resp.json()
    except ValueError:
        raise ProtocolError(f"agent returned non-JSON body (HTTP {resp.status_code})") from None
    if resp.status_code != 200:
        detail = body.get("error") if isinstance(body, dict) else body
        raise ProtocolError(f"agent returned HTTP {resp.status_code}: {detail}")
    artifact = SubmissionArtifact.from_dict(body)
    if artifact.task_id != req.task_id:
        raise ProtocolError(f"task_id mismatch: sent {req.task_id!r}, got {artifact.task_id!r}")
    return artifact


# -- mock agent ------------------------------------------------------------

def serve_mock_purple(
    script: Mapping[str, SubmissionArtifact | dict],
    port: int = 0,
    host: str = "127.0.0.1",
    delay_seconds: float = 0.0,
) -> ServerHandle:
    """Serve canned artifacts keyed by problem_id.

    ``SubmissionArtifact`` values have the request's task_id echoed into
    them. Plain dict values are sent verbatim, which lets tests script a
    misbehaving agent.
    """
    frozen = dict(script)

    class Handler(JSONHandler):
        def do_POST(self) -> None:
            if self.path.rstrip("/") != TASKS_PATH:
                self.send_json(404, {"error": f"unknown path {self.path}"})
                return
            try:
                req = TaskRequest.from_dict(json.loads(self.read_body() or b"null"))
            except (ValueError, ProtocolError) as exc:
                self.send_json(400, {"error": f"bad task request: {exc}"})
                return
            entry = frozen.get(req.problem_id)
            if entry is None:
                self.send_json(404, {"error": f"no submission scripted for problem {req.problem_id!r}"})
                return
            if delay_seconds:
                time.sleep(delay_seconds)
            if isinstance(entry, SubmissionArtifact):
                self.send_json(200, entry.with_task_id(req.task_id).to_dict())
            else:
                self.send_json(200, entry)

    return ServerHandle(bind_server(Handler, host, port))


def load_script(path: str | Path) -> dict[str, SubmissionArtifact | dict]:
    """Read a mock-agent script: a JSON object of problem_id -> artifact.

    A source file entry may give ``path`` (relative to the script) instead
    of inline ``content``.
    """
    path = Path(path)
    data = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ProtocolError(f"{path}: script must map problem_id to artifact objects")
    script: dict[str, SubmissionArtifact | dict] = {}
    for pid, raw in data.items():
        raw = dict(raw)
        raw.setdefault("task_id", "")
        files = []
        for entry in raw.get("source_files", []):
            if isinstance(entry, dict) and "content" not in entry and "path" in entry:
                entry = {"name": entry.get("name") or Path(entry["path"]).name,
                         "content": (path.parent / entry["path"]).read_text(encoding="utf-8")}
            files.append(entry)
        raw["source_files"] = files
        script[pid] = SubmissionArtifact.from_dict(raw)
    return script
