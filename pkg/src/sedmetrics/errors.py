"""Exception hierarchy shared across the toolkit.

The CLI maps these to exit codes: any :class:`SedMetricsError` is a
validation/schema failure (exit 2); plain ``OSError`` is an I/O failure
(exit 3).
"""


class SedMetricsError(Exception):
    """Base class for all toolkit errors."""


class ParseError(SedMetricsError):
    """A text input could not be parsed (carries a line number when known)."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(SedMetricsError):
    """An input parsed but violates an invariant."""


class SchemaError(ValidationError):
    """Column sets, class sets, or config fields do not match expectations."""


class TilingError(ValidationError):
    """Score rows do not tile the clip duration contiguously."""


class CoverageError(ValidationError):
    """A segment or clip is not covered by any score data."""
