"""Exception hierarchy shared by the library and the command-line tool.

Each class carries the process exit code the CLI maps it to.
"""


class EmsrsError(Exception):
    """Base class for all errors raised by :mod:`emsrs`."""

    exit_code = 1


class ConfigError(EmsrsError, ValueError):
    """Malformed scenario configuration, unknown key, or missing unit."""

    exit_code = 2


class DomainError(EmsrsError, ValueError):
    """Input outside the physical domain of an operation (e.g. ``d <= 0``)."""

    exit_code = 3


class CapacityError(DomainError):
    """Problem size exceeds what a brute-force routine accepts."""


class ConvergenceError(EmsrsError, RuntimeError):
    """A numerical routine failed to reach its tolerance."""

    exit_code = 4


class QuadratureError(ConvergenceError):
    """Adaptive quadrature did not converge.

    The best available estimate and its error bound are attached so callers
    can decide whether to use it anyway.
    """

    def __init__(self, message, estimate=None, abserr=None):
        super().__init__(message)
        self.estimate = estimate
        self.abserr = abserr


class FringeFitError(ConvergenceError):
    """Fringe fit is rank deficient (phase grid too sparse or degenerate)."""
