"""Exception hierarchy. Each family maps to one CLI exit code."""


class SubbagError(Exception):
    exit_code = 1


class ConfigError(SubbagError, ValueError):
    """Invalid or contradictory run configuration."""

    exit_code = 2


class DataError(SubbagError, ValueError):
    """Malformed input data (bad cells, wrong shapes, non-finite values)."""

    exit_code = 3


class NumericalError(SubbagError, ArithmeticError):
    exit_code = 4


class NonIdentifiableError(NumericalError):
    """The Hessian of a (sub)sample loss is not positive definite."""


class ConvergenceError(NumericalError):
    """An iterative solver ran out of iterations.

    ``residual`` carries the last gradient sup-norm (Newton) or KKT
    residual (coordinate descent).
    """

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class SubsampleError(NumericalError):
    """A subsample fit failed; wraps the original error with its id."""

    def __init__(self, subsample_id: int, cause: Exception):
        super().__init__(f"subsample {subsample_id}: {cause}")
        self.subsample_id = subsample_id
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", NumericalError.exit_code)
