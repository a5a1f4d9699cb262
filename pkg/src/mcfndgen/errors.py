"""Exception hierarchy shared across the toolkit.

Plain ``ValueError`` is used for simple argument mistakes (bad bounds,
out-of-range indices).  The classes here mark failure modes the CLI maps
to exit codes or that callers are expected to catch and react to.
"""

from __future__ import annotations


class McfndError(Exception):
    """Base class for toolkit-specific failures."""


class ConfigError(McfndError):
    """A configuration value or combination of values is unusable."""


class ParseError(McfndError):
    """A file could not be parsed; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class GenerationError(McfndError):
    """The deterministic generator could not produce a valid instance."""


class CorrelationError(McfndError):
    """A target correlation matrix is not positive definite."""


class RankError(McfndError):
    """Too few scenarios for the number of randomized variables."""


class ConvergenceError(McfndError):
    """Scenario construction exhausted all trials without matching targets."""

    def __init__(self, message: str, best_moment_error: float, best_corr_error: float):
        super().__init__(message)
        self.best_moment_error = best_moment_error
        self.best_corr_error = best_corr_error


class TransformFailure(McfndError):
    """A cubic transform did not converge; the caller retries the trial."""


class SolverStallError(McfndError):
    """The simplex hit its pivot budget; feasibility remains undecided."""


class NoFeasibleScenarioError(McfndError):
    """Feasibility screening rejected every scenario."""
