#!/usr/bin/env python3
"""
Analytic CIL - Errors
Exception hierarchy shared by the library, the CLI and the web service.

Every error carries the process exit code the CLI should use for it:
- 2 for validation problems (shapes, class bookkeeping, files, config)
- 3 for numerical failures (factorizations)
- 4 for failed equivalence checks
"""
from typing import Any, Optional


class AcilError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ValidationError(AcilError, ValueError):
    """Raised when inputs violate a shape, class or configuration invariant."""

    exit_code = 2


class FormatError(ValidationError):
    """Raised when a feature, label, state or report file is malformed."""

    def __init__(self, message: str, path: Optional[str] = None) -> None:
        self.path = path
        if path is not None:
            message = f"{path}: {message}"
        super().__init__(message)


class ChecksumError(FormatError):
    """Raised when a serialized state fails its checksum (corrupt or truncated)."""


class NumericalError(AcilError, ArithmeticError):
    """Raised when a factorization fails."""

    exit_code = 3

    def __init__(self, message: str, condition: Optional[float] = None) -> None:
        self.condition = condition
        if condition is not None:
            message = f"{message} (condition estimate {condition:.3e})"
        super().__init__(message)


class VerificationError(AcilError):
    """Raised when the recursive learner disagrees with the joint solution."""

    exit_code = 4

    def __init__(self, message: str, report: Any = None) -> None:
        self.report = report
        super().__init__(message)


def with_phase(error: AcilError, phase_index: int) -> AcilError:
    """Return a copy of ``error`` whose message names the phase it came from."""
    message = f"phase {phase_index}: {error}"
    wrapped = error.__class__.__new__(error.__class__)
    wrapped.__dict__.update(error.__dict__)
    wrapped.args = (message,)
    return wrapped
