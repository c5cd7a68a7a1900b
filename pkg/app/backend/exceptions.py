"""
Exception hierarchy for Spline-Diff.

Every error carries the CLI exit code it maps to, so the command-line layer
can translate library failures without a lookup table:
- 1: usage / configuration
- 2: data (bad CSV, ordering, too few samples, out-of-domain evaluation)
- 3: numerical failure (singular system, recursion breakdown)
"""


class SplineDiffError(Exception):
    """Base class for all library errors."""
    exit_code = 1


# ============== Configuration ==============

class ConfigurationError(SplineDiffError):
    """Unsupported or invalid settings (bad config file, λ = 0 where λ > 0 is required)."""
    exit_code = 1


# ============== Data ==============

class DataError(SplineDiffError):
    exit_code = 2


class CsvFormatError(DataError):
    """A CSV record could not be parsed. `row` is the 1-based line number."""

    def __init__(self, message: str, row: int = None, path: str = None):
        self.row = row
        self.path = path
        prefix = f"{path}: " if path else ""
        location = f"row {row}: " if row is not None else ""
        super().__init__(f"{prefix}{location}{message}")


class OrderingError(DataError):
    """Sample times are not strictly increasing."""


class InsufficientDataError(DataError):
    """Too few knots for the requested spline order or method."""


class OutOfDomainError(DataError):
    """Evaluation requested outside [t_1, t_K]."""


class ShapeMismatchError(DataError):
    """Vector lengths disagree with the grid."""


# ============== Numerical ==============

class NumericalError(SplineDiffError):
    exit_code = 3


class SingularSystemError(NumericalError):
    """The penalized normal-equation matrix is singular or too ill-conditioned."""


class NumericalBreakdownError(NumericalError):
    """A low-rank update lost accuracy; the caller should refactorize."""
