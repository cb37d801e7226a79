"""Exception hierarchy shared across the toolkit."""


class GrabError(Exception):
    """Base class for all toolkit errors."""


class DomainError(GrabError, ValueError):
    """An argument violates a documented precondition or range."""


class InvalidDepthError(DomainError):
    """Depth value is zero or negative where a positive depth is required."""


class InvalidRotationError(DomainError):
    """Matrix is not a proper rotation (orthonormal, det +1)."""


class InvalidPoseError(DomainError):
    """Pose is degenerate (e.g. zero-length approach direction)."""


class DegenerateGeometryError(GrabError):
    """Point set has insufficient rank for the requested operation."""


class CoverageError(GrabError):
    """A time series does not cover the requested window."""


class RankError(GrabError):
    """Design matrix is rank deficient; names the collinear columns."""

    def __init__(self, columns):
        self.columns = tuple(columns)
        super().__init__(f"design matrix is rank deficient; collinear columns: {', '.join(self.columns)}")


class DataError(GrabError):
    """File contents are invalid."""


class FormatError(DataError):
    """File encoding or container format is unsupported."""


class ParseError(DataError):
    """Line-addressable parse failure."""

    def __init__(self, line_number, message):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class SchemaError(DataError):
    """Unrecognized schema version or malformed header."""
