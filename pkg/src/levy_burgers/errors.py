"""Exception hierarchy shared by the simulator, statistics and harness."""


class BurgersError(Exception):
    """Base class for all package errors."""


class ResolutionError(BurgersError, ValueError):
    """A grid or quadrature is too coarse for the requested mode content."""


class MassConservationError(BurgersError, ValueError):
    """A physical field has a nonzero mean where zero mean is required."""


class StepSizeError(BurgersError):
    """The time step violates the transport CFL bound."""


class BlowUpError(BurgersError):
    """The solution became non-finite or exceeded the blow-up guard.

    ``state`` holds the last finite field (or ``None``) for post-mortem dumps
    and ``step_index`` the step at which the failure was detected.
    """

    def __init__(self, message, state=None, step_index=None):
        super().__init__(message)
        self.state = state
        self.step_index = step_index


class WindowError(BurgersError, ValueError):
    """A snapshot was offered outside the averaging window."""


class MissingStatisticError(BurgersError, KeyError):
    """A statistic was queried that was never requested at accumulation."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class SchemaError(BurgersError, ValueError):
    """Two accumulators with different request sets were merged."""


class FitError(BurgersError, ValueError):
    """A power-law fit had too few points or nonpositive data."""


class ConfigError(BurgersError, ValueError):
    """Invalid experiment configuration (syntax or validation)."""


class DegenerateStatisticError(BurgersError, ZeroDivisionError):
    """A ratio statistic has a zero denominator (e.g. an all-zero field)."""
