"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class PreconditionError(ValueError):
    """Inputs are individually valid but incompatible (sizes, grids, ratios)."""


class ConfigError(ValueError):
    """A configuration violates a model assumption or is malformed."""


class ConvergenceError(ArithmeticError):
    """An iterative solve did not reach its tolerance."""


class BlowUpError(ArithmeticError):
    """A trajectory produced non-finite or exploding coefficients."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step
