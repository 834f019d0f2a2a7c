"""Steady states, their linear stability, and time evolution for a reduced
Ginzburg-Landau model of a current-carrying superconductor."""

from .errors import (
    BlowUp,
    ConfigError,
    DeltaGuardExceeded,
    GLError,
    GridError,
    GridMismatch,
    IncompatibleRHS,
    LinearSolverError,
    NoContraction,
    ProfileError,
    SupercriticalCurrent,
)
from .grid import (
    ContactSegment,
    CurrentProfile,
    Field,
    Grid,
    ModelParams,
    build_current_profile,
    build_grid,
    join,
    split,
    unit_profile,
)

__all__ = [
    "BlowUp", "ConfigError", "DeltaGuardExceeded", "GLError", "GridError", "GridMismatch",
    "IncompatibleRHS", "LinearSolverError", "NoContraction", "ProfileError", "SupercriticalCurrent",
    "ContactSegment", "CurrentProfile", "Field", "Grid", "ModelParams", "build_current_profile",
    "build_grid", "join", "split", "unit_profile",
]

__version__ = "0.1.0"
