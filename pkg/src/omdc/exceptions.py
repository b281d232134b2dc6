"""Exception types raised across the package.

Everything derives from OmdcError so callers can catch one base type.
Subclasses mark the broad failure categories: malformed or inconsistent
inputs, numerical breakdowns, and I/O format problems.
"""


class OmdcError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatchError(OmdcError):
    """Array shapes are inconsistent with each other or with a contract."""


class NumericalError(OmdcError):
    """Non-finite values or a numerically meaningless result."""


class RankError(NumericalError):
    """A requested rank exceeds what the data supports."""


class InputRankError(NumericalError):
    """The input Gram matrix U U^T is numerically singular."""


class ProjectedRankError(NumericalError):
    """A projected Gram matrix L^T X X^T L is numerically singular."""


class InsufficientSnapshotsError(OmdcError):
    """Fewer snapshot columns than an operation requires."""


class TangencyError(NumericalError):
    """A direction is not horizontal at the given subspace point."""


class LineSearchError(NumericalError):
    """Backtracking failed to find an acceptable step."""


class StalledError(NumericalError):
    """Optimizer cannot make progress even along steepest descent.

    Carries the partial solver report in ``report`` and the last
    iterate in ``point`` when available, so callers that consider a
    stall acceptable can keep the best basis found.
    """

    def __init__(self, message, report=None, point=None):
        super().__init__(message)
        self.report = report
        self.point = point


class StabilityError(OmdcError):
    """Explicit time step violates the stability bound."""


class RangeError(OmdcError):
    """A physical quantity left its validity range."""


class FormatError(OmdcError):
    """A file does not conform to the expected on-disk format."""
