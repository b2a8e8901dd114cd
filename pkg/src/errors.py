"""
Prethermal - Error types
Shared exception hierarchy for the library and the CLI.
"""

from typing import Optional


class PrethermalError(Exception):
    """Base class for every error raised by this package."""


class DomainError(PrethermalError, ValueError):
    """Invalid physical input (negative frequency, non-positive beta, bad state)."""


class ConfigError(PrethermalError, ValueError):
    """
    Experiment configuration could not be parsed or failed validation.

    Args:
        message: Human readable description
        path: Dotted path of the offending key (e.g. 'environments[0].r1.beta')
    """

    def __init__(self, message: str, path: Optional[str] = None):
        self.path = path
        full = f"{path}: {message}" if path else message
        super().__init__(full)


class NumericalError(PrethermalError, RuntimeError):
    """A numerical routine failed to reach the requested accuracy."""


class QuadratureError(NumericalError):
    """
    Adaptive quadrature stopped before meeting its tolerance.

    Args:
        message: Description of the failing integral
        error_bound: Error estimate achieved when the routine gave up
    """

    def __init__(self, message: str, error_bound: float):
        self.error_bound = error_bound
        super().__init__(f"{message} (achieved error bound {error_bound:.3e})")


class IntegrationError(NumericalError):
    """
    ODE integration failed.

    Args:
        message: Solver status message
        t_reached: Last time reached by the solver
    """

    def __init__(self, message: str, t_reached: Optional[float] = None):
        self.t_reached = t_reached
        suffix = f" (stopped at t={t_reached:.6g})" if t_reached is not None else ""
        super().__init__(f"{message}{suffix}")
