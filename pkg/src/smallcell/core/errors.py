"""
Exception hierarchy for the smallcell simulator.
"""
from typing import TYPE_CHECKING, Optional

if TYPE_CHECKING:
    from smallcell.core.models import KktState


class SmallCellError(Exception):
    """Base class for all simulator errors."""


class ParameterError(SmallCellError, ValueError):
    """A numeric parameter is outside its admissible range."""


class ConvergenceError(SmallCellError):
    """An iterative solver stopped before meeting its tolerance."""

    def __init__(self, message: str, state: Optional["KktState"] = None):
        super().__init__(message)
        self.state = state


class SingularMatrixError(ConvergenceError):
    """The Newton linear system has no unique solution."""


class DropError(SmallCellError):
    """A failure inside one Monte Carlo drop, tagged with the drop seed."""

    def __init__(self, seed: int, cause: BaseException):
        super().__init__(f"drop with seed {seed} failed: {cause}")
        self.seed = seed
        self.cause = cause

    def __reduce__(self):
        return (DropError, (self.seed, self.cause))
