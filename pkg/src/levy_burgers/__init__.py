"""Pseudo-spectral simulator for the stochastic Burgers equation with Levy forcing."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BlowUpError,
    BurgersError,
    ConfigError,
    FitError,
    MassConservationError,
    MissingStatisticError,
    ResolutionError,
    SchemaError,
    StepSizeError,
    WindowError,
)
from .spectral import FourierField, PhysicalField, analyze, synthesize, sobolev_norm  # noqa: E402
from .noise import CylindricalNoiseConfig, LevyMeasureConfig  # noqa: E402
from .solver import SolverConfig, cole_hopf_reference, integrate, step  # noqa: E402
