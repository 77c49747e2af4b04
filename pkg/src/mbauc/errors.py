"""Exception hierarchy. CLI exit codes hang off these classes."""


class MBAError(Exception):
    exit_code = 1


class ConfigError(MBAError, ValueError):
    exit_code = 2


class DataError(MBAError, ValueError):
    exit_code = 3


class ParseError(DataError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NumericalError(MBAError, ArithmeticError):
    exit_code = 4


class ConvergenceError(NumericalError):
    """Solver hit its iteration cap. Carries the last iterate."""

    def __init__(self, message, w=None, residual=None, iters=None):
        super().__init__(message)
        self.w = w
        self.residual = residual
        self.iters = iters
