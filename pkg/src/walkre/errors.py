"""Exception types shared across the package."""


class WalkreError(Exception):
    """Base class for all package errors."""


class IngestError(WalkreError):
    """Raised when a corpus or split file cannot be parsed."""


class UnsupportedArityError(WalkreError):
    """Raised for relationship arities other than 2."""


class EmptyGraphError(WalkreError):
    """Raised when a kernel operation receives a view with no vertices."""


class ConvergenceError(WalkreError):
    """Raised when an iterative solver runs out of iterations.

    Carries the iteration count and the last residual; for Gram-matrix
    computations the offending candidate pair is attached as well.
    """

    def __init__(self, message, iterations=None, residual=None, pair=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual
        self.pair = pair


class InvalidInputError(WalkreError):
    """Raised for structurally invalid inputs (length mismatches, bad values)."""


class InvalidParameterError(WalkreError):
    """Raised for parameter values outside their documented domain."""


class DegenerateLabelsError(WalkreError):
    """Raised when SVM training data contains a single class."""
