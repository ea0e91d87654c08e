"""Exception types shared across the package."""


class TurnpikeError(Exception):
    """Base class for all package errors."""


class GridMismatchError(TurnpikeError, ValueError):
    """Two objects were defined on different grids."""


class EmptySetError(TurnpikeError, ValueError):
    """A point set that must be nonempty was empty."""


class InvalidMaskError(TurnpikeError, ValueError):
    """A mask violates the nonempty / inactive-frame invariants."""


class SolverDivergenceError(TurnpikeError, RuntimeError):
    """A linear solve missed its residual tolerance."""


class ConvergenceError(TurnpikeError, RuntimeError):
    """An iterative eigen-solve exhausted its iteration budget."""


class InfeasibleInitError(TurnpikeError, ValueError):
    """The optimizer was started from an inadmissible mask."""


class InsufficientPointsError(TurnpikeError, ValueError):
    """Too few usable points for a rate fit."""


class InadmissiblePerturbationError(TurnpikeError, ValueError):
    """A probe schedule contains a mask outside the admissible class."""


class ConfigError(TurnpikeError, ValueError):
    """Malformed or inconsistent run configuration."""
