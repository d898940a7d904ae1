"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """An argument violates a documented precondition."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to converge within its budget."""


class NewtonError(RuntimeError):
    """Newton iteration failed to reach the residual tolerance."""

    def __init__(self, message, residual=None, step=None):
        super().__init__(message)
        self.residual = residual
        self.step = step


class RegionError(ValueError):
    """A cylinder or ball escapes the grid's space-time box."""


class ShiftError(ValueError):
    """A finite-difference shift is not aligned with the grid."""


class InsufficientDataError(ValueError):
    """Not enough usable data points for a fit."""


class CatalogError(KeyError):
    """Unknown manufactured-problem name."""


class ConfigError(ValueError):
    """One or more configuration entries failed validation."""

    def __init__(self, failures):
        if isinstance(failures, str):
            failures = [failures]
        self.failures = list(failures)
        super().__init__("; ".join(self.failures))
