"""Exception hierarchy for AC primal-dual solvers."""

from typing import Any, Dict, Optional


class SolverError(Exception):
    """Base class for all solver-side failures."""


class DivergenceError(SolverError):
    """An iterate became non-finite."""

    def __init__(self, iteration: int, what: str):
        self.iteration = iteration
        self.what = what
        super().__init__(f"non-finite {what} at iteration {iteration}")


class OracleUnavailableError(SolverError):
    """No supported closed form or strategy for the requested oracle call."""


class SchedulerError(SolverError):
    """Stepsize scheduler used out of order or without a usable eta1."""


class GuessCheckError(SolverError):
    """Guess-and-check exhausted its outer or inner budget."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class ConfigError(SolverError, ValueError):
    """Invalid or incompatible run configuration."""
