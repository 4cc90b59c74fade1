"""Exception hierarchy shared by all modules."""


class IBMDiffError(Exception):
    """Base class for errors raised by this package."""


class BoundaryExceedsGrid(IBMDiffError):
    """The circle plus one ghost ring does not fit on the lattice."""


class DegeneratePoint(IBMDiffError):
    """Projection requested at (or numerically at) the circle center."""


class ZeroDistancePower(IBMDiffError):
    """Power-of-distance weight evaluated at zero distance."""


class EmptyStencil(IBMDiffError):
    """No interior node lies within the stencil radius of an image point."""


class RegularityFailure(IBMDiffError):
    """Moment matrix too ill-conditioned to invert reliably."""

    def __init__(self, message, rcond=None, gp=None):
        super().__init__(message)
        self.rcond = rcond
        self.gp = gp


class StabilityViolation(IBMDiffError):
    """Time step breaks the explicit FTCS stability limit."""


class RootCountUnreachable(IBMDiffError):
    """Bessel root bracketing failed or the root cap was exceeded."""


class EarlyTimeUnsupported(IBMDiffError):
    """Series reference cannot be evaluated flag-free in double precision."""


class DivisionByZeroConcentration(IBMDiffError, ZeroDivisionError):
    """A relative error was requested against a zero reference value."""


class PrecisionLossAtReference(IBMDiffError):
    """An analytical reference value needed by a report is cancellation-flagged."""


class ReferenceDomainTooSmall(IBMDiffError):
    """The reflection-free reference lattice edge is not negligible."""


class DegenerateAbscissae(IBMDiffError, ValueError):
    """Too few distinct abscissae for a straight-line fit."""


class AllFailed(IBMDiffError):
    """Every sampled parameter value produced a failure."""


class ConfigError(IBMDiffError, ValueError):
    """Configuration file could not be parsed or is incomplete."""
