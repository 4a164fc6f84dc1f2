"""
Exception hierarchy shared by every simulator module.

The CLI maps these onto exit codes: configuration and parameter problems
exit with 2, numerical failures with 3.
"""
from __future__ import annotations

from typing import Any


class SimulationError(RuntimeError):
    """Base class for all simulator errors."""


class InvalidParameterError(SimulationError, ValueError):
    """A physical parameter is outside its allowed domain."""


class InvalidIntervalError(InvalidParameterError):
    """An integration interval is reversed."""


class ConfigError(SimulationError):
    """An experiment configuration failed schema validation."""

    def __init__(self, message: str, diagnostics: list[str] | None = None):
        self.message = message
        self.diagnostics = diagnostics or []
        detail = "; ".join(self.diagnostics)
        super().__init__(f"{message}: {detail}" if detail else message)


class NumericalError(SimulationError):
    """A numerical routine failed (singular matrix, quadrature, ...)."""

    def __init__(self, message: str, diagnostic: str = ""):
        self.diagnostic = diagnostic
        super().__init__(f"{message} ({diagnostic})" if diagnostic else message)


class IntegrationError(NumericalError):
    """The time-stepper could not meet its tolerance above the minimum step."""

    def __init__(self, message: str, t: float, diagnostic: str = ""):
        self.t = t
        super().__init__(f"{message} at t={t:.6e} s", diagnostic)


class FitError(NumericalError):
    """Base class for least-squares failures."""


class RankDeficiencyError(FitError):
    """The Jacobian is rank deficient, typically because the data are flat."""


class FitConvergenceError(FitError):
    """The optimizer stopped without converging."""

    def __init__(self, message: str, last_iterate: Any = None, diagnostic: str = ""):
        self.last_iterate = last_iterate
        super().__init__(message, diagnostic)


class DegenerateNormalizationError(NumericalError):
    """The reference signals used for normalization coincide."""
