"""Exception hierarchy.

Two families matter to the command line: :class:`ValidationError` for inputs
that violate a documented invariant (exit code 2) and
:class:`NumericalGuardError` for runs stopped by a numerical safety check
(exit code 3).
"""


class RelechoError(Exception):
    pass


class ValidationError(RelechoError, ValueError):
    pass


class NumericalGuardError(RelechoError, RuntimeError):
    pass


class GridTooSmall(ValidationError):
    """Sampled orbital does not decay before the grid boundary."""


class GridTooCoarse(ValidationError):
    """Grid spacing does not resolve a perturbation or stencil scale."""


class GridMismatch(ValidationError):
    """Fields live on different grids (or carry different kz)."""


class EmptyTruncation(ValidationError):
    pass


class TruncationTooLarge(ValidationError):
    pass


class WeightSumViolation(ValidationError):
    pass


class MemoryCeiling(NumericalGuardError):
    pass


class BoundaryFluxTooLarge(NumericalGuardError):
    pass


class FitFailure(NumericalGuardError):
    pass


class StabilityViolation(NumericalGuardError):
    pass
