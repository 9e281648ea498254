"""Exception types raised across the package."""


class CggmError(Exception):
    """Base class for all errors raised by this package."""


class NotSymmetricError(CggmError):
    """Matrix expected to be exactly symmetric is not."""


class NotPositiveDefiniteError(CggmError):
    """Cholesky factorization failed: matrix is not positive definite."""


class PenaltyVacuousError(CggmError):
    """Fusion penalty is undefined for p < 3 (pair blocks would have no rows)."""


class InvalidWeightError(CggmError):
    """A fusion weight is negative or non-finite."""


class LineSearchStalledError(CggmError):
    """Backtracking step size underflowed before finding an acceptable step."""

    def __init__(self, message: str, outer_iter: int = -1, inner_iter: int = -1):
        super().__init__(message)
        self.outer_iter = outer_iter
        self.inner_iter = inner_iter


class NotCenteredError(CggmError):
    """Operation requires column-centered data."""


class DegenerateColumnError(CggmError):
    """A data column has zero variance."""

    def __init__(self, message: str, column: int = -1):
        super().__init__(message)
        self.column = column


class InvalidSizesError(CggmError):
    """Cluster sizes are inconsistent with the requested dimension."""


class InvalidKError(CggmError):
    """Requested cluster count is out of range."""


class ShapeMismatchError(CggmError):
    """Inputs have inconsistent dimensions."""


class UndefinedMetricError(CggmError):
    """Metric is undefined for the given input (e.g. Rand index with p < 2)."""


class ParseError(CggmError):
    """Malformed input file; message carries row/column context."""
