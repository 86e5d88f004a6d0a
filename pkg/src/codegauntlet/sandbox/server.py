"""JSON-RPC 2.0 tool server exposing ``compile`` and ``run`` at ``POST /mcp``."""

from __future__ import annotations

import argparse
import json
import logging
import signal
import sys
import threading
from typing import Any

from .._http import JSONHandler, ServerHandle, bind_server
from ..errors import BindError, HarnessError, ProfileError, SandboxError
from .core import SandboxService
from .profile import ToolchainProfile, load_profile

log = logging.getLogger(__name__)

MCP_PATH = "/mcp"

PARSE_ERROR = -32700
INVALID_REQUEST = -32600
METHOD_NOT_FOUND = -32601
INVALID_PARAMS = -32602
INTERNAL_ERROR = -32603
SANDBOX_ERROR = -32000

TOOLS = [
    {
        "name": "compile",
        "description": "Build the uploaded source files with the active toolchain profile.",
        "inputSchema": {
            "type": "object",
            "properties": {
                "files": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {"name": {"type": "string"}, "content": {"type": "string"}},
                        "required": ["name", "content"],
                    },
                },
                "entry_point": {"type": "string"},
                "dependencies": {"type": "array", "items": {"type": "string"}},
                "session_id": {"type": "string"},
            },
            "required": ["files", "entry_point"],
        },
    },
    {
        "name": "run",
        "description": "Execute the session's compiled binary with the given ranks and arguments.",
        "inputSchema": {
            "type": "object",
            "properties": {
                "session_id": {"type": "string"},
                "args": {"type": "array", "items": {"type": "string"}},
                "ranks": {"type": "integer", "minimum": 1},
                "timeout_seconds": {"type": "number", "exclusiveMinimum": 0},
                "memcheck": {"type": "boolean"},
            },
            "required": ["session_id"],
        },
    },
]


class RPCError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _str_list(value: Any, name: str) -> list[str]:
    if value is None:
        return []
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise RPCError(INVALID_PARAMS, f"{name} must be an array of strings")
    return value


def _call_compile(service: SandboxService, args: dict[str, Any]) -> dict[str, Any]:
    files = args.get("files")
    if not isinstance(files, list) or not files:
        raise RPCError(INVALID_PARAMS, "files must be a non-empty array")
    pairs = []
    for f in files:
        if not isinstance(f, dict) or not isinstance(f.get("name"), str) or not isinstance(f.get("content"), str):
            raise RPCError(INVALID_PARAMS, "each file needs string 'name' and 'content'")
        pairs.append((f["name"], f["content"]))
    entry = args.get("entry_point")
    if not isinstance(entry, str):
        raise RPCError(INVALID_PARAMS, "entry_point must be a string")
    session_id = args.get("session_id")
    if session_id is not None and not isinstance(session_id, str):
        raise RPCError(INVALID_PARAMS, "session_id must be a string")
    deps = _str_list(args.get("dependencies"), "dependencies")
    return service.compile(pairs, entry, deps, session_id).to_dict()


def _call_run(service: SandboxService, args: dict[str, Any]) -> dict[str, Any]:
    session_id = args.get("session_id")
    if not isinstance(session_id, str):
        raise RPCError(INVALID_PARAMS, "session_id must be a string")
    ranks = args.get("ranks", 1)
    if isinstance(ranks, bool) or not isinstance(ranks, int) or ranks < 1:
        raise RPCError(INVALID_PARAMS, "ranks must be a positive integer")
    timeout = args.get("timeout_seconds", 120.0)
    if isinstance(timeout, bool) or not isinstance(timeout, (int, float)) or timeout <= 0:
        raise RPCError(INVALID_PARAMS, "timeout_seconds must be a positive number")
    memcheck = bool(args.get("memcheck", False))
    return service.run(session_id, _str_list(args.get("args"), "args"), ranks, float(timeout), memcheck).to_dict()


def handle_rpc(service: SandboxService, message: Any) -> dict[str, Any] | None:
    """Dispatch one decoded JSON-RPC message; None means no reply (notification)."""
    if not isinstance(message, dict) or message.get("jsonrpc") != "2.0" or not isinstance(message.get("method"), str):
        rid = message.get("id") if isinstance(message, dict) else None
        return _error(rid, INVALID_REQUEST, "invalid JSON-RPC 2.0 request")
    rid = message.get("id")
    is_notification = "id" not in message
    params = message.get("params") or {}
    try:
        if not isinstance(params, dict):
            raise RPCError(INVALID_PARAMS, "params must be an object")
        result = _dispatch(service, message["method"], params)
    except RPCError as exc:
        return None if is_notification else _error(rid, exc.code, str(exc))
    except SandboxError as exc:
        return None if is_notification else _error(rid, SANDBOX_ERROR, str(exc))
    except Exception as exc:  # keep the server alive on unexpected faults
        log.exception("internal error handling %s", message.get("method"))
        return None if is_notification else _error(rid, INTERNAL_ERROR, f"internal error: {exc}")
    if is_notification:
        return None
    return {"jsonrpc": "2.0", "id": rid, "result": result}


def _dispatch(service: SandboxService, method: str, params: dict[str, Any]) -> Any:
    if method == "initialize":
        return {
            "protocolVersion": "2024-11-05",
            "serverInfo": {"name": "codegauntlet-sandbox", "version": "0.1.0"},
            "capabilities": {"tools": {}},
        }
    if method == "tools/list":
        return {"tools": TOOLS}
    if method == "tools/call":
        name = params.get("name")
        args = params.get("arguments") or {}
        if not isinstance(args, dict):
            raise RPCError(INVALID_PARAMS, "arguments must be an object")
        if name == "compile":
            return _call_compile(service, args)
        if name == "run":
            return _call_run(service, args)
        raise RPCError(INVALID_PARAMS, f"unknown tool {name!r}")
    if method == "sessions/close":
        sid = params.get("session_id")
        if not isinstance(sid, str):
            raise RPCError(INVALID_PARAMS, "session_id must be a string")
        keep = params.get("keep_artifacts")
        service.close_session(sid, None if keep is None else bool(keep))
        return {"closed": sid}
    raise RPCError(METHOD_NOT_FOUND, f"method not found: {method}")


def _error(rid: Any, code: int, message: str) -> dict[str, Any]:
    return {"jsonrpc": "2.0", "id": rid, "error": {"code": code, "message": message}}


class ToolServerHandle(ServerHandle):
    def __init__(self, server, service: SandboxService):
        super().__init__(server)
        self.service = service


def serve_tools(
    profile: ToolchainProfile | SandboxService,
    port: int = 0,
    host: str = "127.0.0.1",
    workdir: str | None = None,
    keep_artifacts: bool = False,
) -> ToolServerHandle:
    if isinstance(profile, SandboxService):
        service = profile
    else:
        if workdir is None:
            raise SandboxError("workdir is required when serving from a profile")
        service = SandboxService(profile, workdir, keep_artifacts=keep_artifacts)

    class Handler(JSONHandler):
        def do_POST(self) -> None:
            if self.path.rstrip("/") != MCP_PATH:
                self.send_json(404, {"error": f"unknown path {self.path}"})
                return
            try:
                message = json.loads(self.read_body())
            except (ValueError, UnicodeDecodeError):
                self.send_json(200, _error(None, PARSE_ERROR, "parse error"))
                return
            reply = handle_rpc(service, message)
            if reply is None:
                self.send_response(204)
                self.send_header("Content-Length", "0")
                self.end_headers()
            else:
                self.send_json(200, reply)

    return ToolServerHandle(bind_server(Handler, host, port), service)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="sandboxd", description="Serve the compile/run tools over JSON-RPC.")
    parser.add_argument("--profile", default="plain-c", help="profile JSON path or built-in name")
    parser.add_argument("--port", type=int, default=9100)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--workdir", required=True)
    parser.add_argument("--keep-artifacts", action="store_true")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO)
    try:
        profile = load_profile(args.profile)
        handle = serve_tools(profile, args.port, args.host, args.workdir, args.keep_artifacts)
    except (ProfileError, BindError, HarnessError) as exc:
        print(f"sandboxd: {exc}", file=sys.stderr)
        return 2
    log.info("serving profile %s at %s%s", profile.name, handle.url, MCP_PATH)
    stop = threading.Event()
    signal.signal(signal.SIGTERM, lambda *_: stop.set())
    try:
        stop.wait()
    except KeyboardInterrupt:
        pass
    handle.close()
    handle.service.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
