"""Exception hierarchy. The CLI maps each class to an exit code."""


class CurvtestError(Exception):
    """Base class for all library errors."""

    exit_code = 2


class ConfigError(CurvtestError, ValueError):
    """Invalid configuration or usage."""

    exit_code = 1


class DataError(CurvtestError, ValueError):
    """Input data violates a contract (shape, finiteness, size)."""

    exit_code = 2


class SingularDesignError(DataError):
    """Design matrix is rank deficient."""

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class NumericalError(CurvtestError, ArithmeticError):
    """A numerical routine failed to converge or degenerated."""

    exit_code = 3
