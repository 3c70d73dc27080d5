"""Exception types raised across the package."""


class BalsiError(Exception):
    """Base class for all package errors."""


class DomainError(BalsiError, ValueError):
    """An argument lies outside the admissible domain (e.g. theta_5 <= 0)."""


class NumericalError(BalsiError):
    """Base for failures of the numerical machinery (CLI exit code 3)."""


class NonFiniteState(NumericalError):
    """The integrated state acquired a non-finite component."""


class StepFailure(NumericalError):
    """The adaptive stepper could not meet its tolerances."""


class InfeasibleConstraint(NumericalError):
    """The set {theta in Theta : Q theta = Y} is empty."""


class NonConvergence(NumericalError):
    """An iterative solver exhausted its iteration budget."""


class ParseError(BalsiError):
    """Malformed scenario file. ``lineno`` is 1-based, or None if unknown."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class ValidationError(BalsiError, ValueError):
    """A scenario parsed correctly but violates one of its invariants."""


class GridTooCoarse(UserWarning):
    """Richardson disagreement of the quadrature oracle exceeds the request."""
