"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: configuration and domain
problems exit with 2, bad input data exits with 3.
"""

from __future__ import annotations


class ValidationError(ValueError):
    """Invalid configuration, spec, or parameter values.

    Carries a list of human-readable problem descriptions so callers can
    report every violated constraint at once.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class DataError(ValueError):
    """Input data unusable (non-finite samples, inconsistent trace)."""


class TraceFormatError(DataError):
    """Malformed trace file; ``line`` is the 1-based offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ModelValidityWarning(UserWarning):
    """Inputs leave the large-detuning / low-saturation regime of the model."""
