"""Exception hierarchy shared across the harness."""

from __future__ import annotations


class HarnessError(Exception):
    """Base class for every error raised by codegauntlet."""


# problem registry

class ParseError(HarnessError):
    pass


class SchemaError(HarnessError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class DuplicateId(HarnessError):
    pass


class ExtractionError(HarnessError):
    pass


# agent protocol

class TransportError(HarnessError):
    pass


class ProtocolError(HarnessError):
    pass


class BindError(HarnessError):
    pass


# sandbox

class SandboxError(HarnessError):
    """Infrastructure fault in the sandbox, as opposed to a failing program."""


class ProfileError(HarnessError):
    pass


# evaluation

class JudgeProtocolError(HarnessError):
    pass


class RuleFileError(HarnessError):
    pass


class EmptyCategory(HarnessError):
    pass


class ConfigError(HarnessError):
    pass


class InfrastructureError(HarnessError):
    """The run could not be scored because the tool provider was unusable."""
