"""Exception types shared across the package."""


class InfogeoError(Exception):
    """Base class for all package errors."""


class DomainError(InfogeoError, ValueError):
    """A parameter or input lies outside the allowed domain."""


class IntegrationError(InfogeoError, RuntimeError):
    """An ODE integration failed (non-finite state, step underflow)."""


class OptimizationError(InfogeoError, RuntimeError):
    """Maximum-likelihood search could not produce a finite value."""


class SingularMetricError(InfogeoError, ArithmeticError):
    """The Fisher metric is singular or not positive definite."""


class ConfigError(InfogeoError, ValueError):
    """An experiment configuration failed validation.

    ``path`` is the JSON path of the offending field, e.g. ``design.times``.
    """

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message
