"""Sandboxed compile/run tool provider and its clients."""

from .client import HttpToolClient, LocalToolClient, ToolClient
from .core import MemcheckReport, SandboxService, ToolResult, run_process
from .profile import ToolchainProfile, load_profile
from .server import serve_tools

__all__ = [
    "HttpToolClient",
    "LocalToolClient",
    "MemcheckReport",
    "SandboxService",
    "ToolClient",
    "ToolResult",
    "ToolchainProfile",
    "load_profile",
    "run_process",
    "serve_tools",
]
