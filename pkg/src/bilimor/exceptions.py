"""Exception and warning types raised by bilimor."""


class BilimorError(Exception):
    """Base class for all errors raised by this package."""


class InputError(BilimorError, ValueError):
    """Inconsistent or invalid user input."""


class SingularShift(BilimorError, ArithmeticError):
    """A shifted system ``(s I - A)`` is numerically singular."""


class SingularSystem(BilimorError, ArithmeticError):
    """A dense vectorized linear system is numerically singular."""


class DivergentSeries(BilimorError, ArithmeticError):
    """A Neumann/Volterra series does not converge."""


class Divergent(DivergentSeries):
    """A norm series diverges, so the system is not an H2 system.

    ``partial`` holds the last accumulated value (an ``H2Result``) when
    available.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class EigenFailure(BilimorError, ArithmeticError):
    """Eigendecomposition failed or the eigenbasis is unusable."""


class RepeatedEigenvalues(EigenFailure):
    """Eigenvalues are not simple to within tolerance."""


class UnstableSystem(BilimorError, ValueError):
    """The state matrix has eigenvalues with nonnegative real part."""


class RankDeficient(BilimorError, ArithmeticError):
    """``W^T V`` is numerically singular."""


class SingularProjection(RankDeficient):
    """Projection failed inside an iterative reduction loop."""


class NumericalOverflow(BilimorError, OverflowError):
    """A trajectory or kernel evaluation left the finite floating range."""


class GridMismatch(BilimorError, ValueError):
    """Two simulation results live on different time grids."""


class MaxIterExceeded(UserWarning):
    """An iteration stopped at ``max_iter`` without meeting its tolerance."""
