"""Exception hierarchy shared by all scalefit modules."""

from __future__ import annotations

import numpy as np


class ScalefitError(Exception):
    """Base class for every error raised by scalefit."""


class InputError(ScalefitError, ValueError):
    """Invalid argument, shape or configuration."""


class UnsupportedOperationError(ScalefitError):
    """Operation is not defined for the given loss or model family."""


class NumericalError(ScalefitError):
    """A linear-algebra step failed (e.g. a Gram factorization)."""


class ConvergenceError(ScalefitError):
    """Solver stopped at ``max_iter`` before meeting its tolerance.

    The last iterate and its residual are kept so callers can inspect or
    reuse them.
    """

    def __init__(self, message: str, coefficients: np.ndarray, residual: float, iterations: int):
        super().__init__(message)
        self.coefficients = coefficients
        self.residual = residual
        self.iterations = iterations


class ScheduleError(InputError):
    """Regularization schedule violates the lambda_1^2 lambda_2^2 n -> inf rate condition."""


class CSVParseError(InputError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class ModelFormatError(ScalefitError):
    """Model file cannot be read."""


class ModelVersionError(ModelFormatError):
    pass


class ModelIntegrityError(ModelFormatError):
    pass
