"""Exception hierarchy.

Validation problems derive from :class:`ValidationError` (also a
``ValueError``); numerical breakdowns derive from :class:`NumericalError`.
The CLI maps the two families onto exit codes 2 and 3.
"""


class CloneradError(Exception):
    """Base class for all package errors."""


class ValidationError(CloneradError, ValueError):
    """An input violates a documented precondition."""


class NonRearrangeableError(ValidationError):
    """A gain element cannot be moved in front of a loss element."""


class ConfigError(ValidationError):
    """Malformed or unknown configuration entry."""


class NumericalError(CloneradError, ArithmeticError):
    """A numerical procedure failed to produce a trustworthy result."""


class IntegrationError(NumericalError):
    """The gain/loss ODE left its physical domain."""

    def __init__(self, message, z=None):
        super().__init__(message)
        self.z = z


class CalibrationError(NumericalError):
    """No profile amplitude reaches the requested total gain."""


class ConvergenceError(NumericalError):
    """An iterative fit stopped without converging."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class TruncationError(NumericalError):
    """Population leaked into the top of a truncated Fock basis."""
