class GPMEError(Exception):
    """Base class for errors raised by gpmelab."""


class ConfigurationError(GPMEError, ValueError):
    """Inconsistent or invalid run configuration."""


class DomainError(GPMEError, ValueError):
    """Argument outside the domain where a closed form is defined."""


class NumericalFailure(GPMEError, RuntimeError):
    """A simulation produced non-finite values or a solver did not converge."""

    def __init__(self, message, step=None, node=None, residual=None):
        super().__init__(message)
        self.step = step
        self.node = node
        self.residual = residual
