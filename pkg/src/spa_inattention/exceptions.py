"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class TooLargeError(ValueError):
    """An oracle instance exceeds the size it is willing to enumerate."""


class RankError(ValueError):
    """Design matrix is rank deficient."""

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class ConvergenceError(RuntimeError):
    """A fixed-point iteration hit its iteration cap."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual
