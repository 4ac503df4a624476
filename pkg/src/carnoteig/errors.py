"""Exception types shared across the package."""


class CarnotError(Exception):
    """Base class for all package errors."""


class StructuralError(CarnotError, ValueError):
    """Array shapes or grids do not conform to the group / grid in use."""


class DomainError(CarnotError, ValueError):
    """A parameter lies outside its admissible range."""


class ConfigurationError(CarnotError, ValueError):
    """A grid, domain or experiment setting is unusable."""


class ConvergenceError(CarnotError, RuntimeError):
    """An iterative solver did not reach its tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
