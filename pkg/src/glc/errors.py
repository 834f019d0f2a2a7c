"""Exception hierarchy.

Physical outcomes (the current is too large for the constructive scheme)
derive from :class:`PhysicalBreakdown`; everything else is a bug or a bad
input.
"""


class GLError(Exception):
    """Base class for all package errors."""


class GridError(GLError, ValueError):
    """Invalid grid or contact specification."""


class ProfileError(GLError, ValueError):
    """Invalid current profile."""


class GridMismatch(GLError, ValueError):
    """Fields defined on different grids were combined."""


class IncompatibleRHS(GLError, ValueError):
    """Right-hand side of a singular Neumann problem has nonzero integral."""


class LinearSolverError(GLError, RuntimeError):
    """A linear solve failed to reach its tolerance."""


class ConfigError(GLError, ValueError):
    """Run configuration could not be parsed or validated."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class BlowUp(GLError, RuntimeError):
    """Time integration produced non-finite values."""

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class PhysicalBreakdown(GLError):
    """The applied current is outside the regime the solver can handle."""


class SupercriticalCurrent(PhysicalBreakdown):
    """The slaved density 1 - delta^2 |grad chi|^2 lost positivity."""

    def __init__(self, cell, max_value):
        super().__init__(
            f"delta^2 |grad chi|^2 = {max_value:.6g} >= 1 at cell {cell}"
        )
        self.cell = cell
        self.max_value = max_value


class NoContraction(PhysicalBreakdown):
    """A fixed-point iteration stopped contracting."""

    def __init__(self, stage, ratios, delta=None):
        tail = ", ".join(f"{r:.3g}" for r in ratios[-3:])
        super().__init__(f"{stage}: iteration not contracting (last ratios {tail})")
        self.stage = stage
        self.ratios = list(ratios)
        self.delta = delta


class DeltaGuardExceeded(PhysicalBreakdown):
    """delta is above the configured smallness guard."""

    def __init__(self, delta, guard):
        super().__init__(f"delta = {delta:.6g} exceeds guard {guard:.6g}")
        self.delta = delta
        self.guard = guard
