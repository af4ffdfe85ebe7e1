"""Error hierarchy for the gross_tower engine.

Library code raises these; only the command line turns them into exit codes.
"""

from __future__ import annotations

from typing import Any, Optional


class GrossTowerError(Exception):
    """Base class for every error raised by the engine."""

    exit_code: int = 4

    def __init__(self, message: str, *, details: Optional[dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> dict[str, Any]:
        return {
            "error": type(self).__name__,
            "message": self.message,
            "exit_code": self.exit_code,
            "details": self.details,
        }


class InvalidInputError(GrossTowerError):
    """Malformed parameters or a violated arithmetic hypothesis."""

    exit_code = 2


class PreconditionError(InvalidInputError):
    """A well-formed request outside the range the construction supports."""


class NonexistenceError(GrossTowerError):
    """The requested object does not exist (e.g. no ordinary eigensystem)."""

    exit_code = 3


class InternalInvariantError(GrossTowerError):
    """A certified check failed; signals a bug rather than bad input."""

    exit_code = 4


class PrecisionError(InternalInvariantError):
    """An answer could not be certified at the available p-adic precision."""
