"""Clients for the compile/run tools: over JSON-RPC, or in-process."""

from __future__ import annotations

import itertools
import threading
from typing import Any, Protocol, Sequence

import httpx

from ..errors import SandboxError
from .core import SandboxService, ToolResult
from .server import MCP_PATH

# Slack on top of a run's own timeout for process teardown and memcheck.
RUN_TRANSPORT_SLACK = 60.0


class ToolClient(Protocol):
    def compile(self, files: Sequence[tuple[str, str]], entry_point: str, dependencies: Sequence[str] = (),
                session_id: str | None = None) -> ToolResult: ...

    def run(self, session_id: str, args: Sequence[str] = (), ranks: int = 1, timeout_seconds: float = 120.0,
            memcheck: bool = False) -> ToolResult: ...

    def close_session(self, session_id: str, keep_artifacts: bool | None = None) -> None: ...


class LocalToolClient:
    """Calls a SandboxService directly; same contract as the HTTP client."""

    def __init__(self, service: SandboxService):
        self.service = service

    def compile(self, files, entry_point, dependencies=(), session_id=None) -> ToolResult:
        return self.service.compile(list(files), entry_point, list(dependencies), session_id)

    def run(self, session_id, args=(), ranks=1, timeout_seconds=120.0, memcheck=False) -> ToolResult:
        return self.service.run(session_id, list(args), ranks, timeout_seconds, memcheck)

    def close_session(self, session_id, keep_artifacts=None) -> None:
        self.service.close_session(session_id, keep_artifacts)


class HttpToolClient:
    def __init__(self, endpoint: str, compile_timeout: float = 600.0):
        url = endpoint.rstrip("/")
        self.url = url if url.endswith(MCP_PATH) else url + MCP_PATH
        self.compile_timeout = compile_timeout
        self._ids = itertools.count(1)
        self._id_lock = threading.Lock()

    def _next_id(self) -> int:
        with self._id_lock:
            return next(self._ids)

    def request(self, method: str, params: dict[str, Any] | None = None, timeout: float = 30.0) -> Any:
        body = {"jsonrpc": "2.0", "id": self._next_id(), "method": method, "params": params or {}}
        try:
            resp = httpx.post(self.url, json=body, timeout=timeout)
            reply = resp.json()
        except httpx.HTTPError as exc:
            raise SandboxError(f"tool server unreachable at {self.url}: {exc}") from exc
        except ValueError as exc:
            raise SandboxError(f"tool server sent a non-JSON reply: {exc}") from exc
        if not isinstance(reply, dict):
            raise SandboxError("tool server sent a malformed JSON-RPC reply")
        if "error" in reply:
            err = reply["error"] or {}
            raise SandboxError(f"tool server error {err.get('code')}: {err.get('message')}")
        return reply.get("result")

    def list_tools(self) -> list[str]:
        return [t["name"] for t in self.request("tools/list")["tools"]]

    def compile(self, files, entry_point, dependencies=(), session_id=None) -> ToolResult:
        args: dict[str, Any] = {
            "files": [{"name": n, "content": c} for n, c in files],
            "entry_point": entry_point,
            "dependencies": list(dependencies),
        }
        if session_id is not None:
            args["session_id"] = session_id
        result = self.request("tools/call", {"name": "compile", "arguments": args}, timeout=self.compile_timeout)
        return ToolResult.from_dict(result)

    def run(self, session_id, args=(), ranks=1, timeout_seconds=120.0, memcheck=False) -> ToolResult:
        arguments = {"session_id": session_id, "args": list(args), "ranks": ranks,
                     "timeout_seconds": timeout_seconds, "memcheck": memcheck}
        result = self.request("tools/call", {"name": "run", "arguments": arguments},
                              timeout=timeout_seconds + RUN_TRANSPORT_SLACK)
        return ToolResult.from_dict(result)

    def close_session(self, session_id, keep_artifacts=None) -> None:
        params: dict[str, Any] = {"session_id": session_id}
        if keep_artifacts is not None:
            params["keep_artifacts"] = keep_artifacts
        self.request("sessions/close", params)
