"""Exception types shared across the package."""


class QknnError(Exception):
    """Base class for all package errors."""


class ParameterError(QknnError, ValueError):
    """A scalar parameter is outside its admissible range."""


class InputError(QknnError, ValueError):
    """Input data is malformed (non-finite values, bad file contents, ...)."""


class DimensionError(QknnError, ValueError):
    """Array shapes do not agree with the graph or with each other."""


class ConvergenceError(QknnError, RuntimeError):
    """An iterative routine stopped before reaching its tolerance.

    Carries the final iterate so callers that tolerate inexact solves can
    still proceed.
    """

    def __init__(self, message, residual=None, iterate=None, dual=None):
        super().__init__(message)
        self.residual = residual
        self.iterate = iterate
        self.dual = dual
