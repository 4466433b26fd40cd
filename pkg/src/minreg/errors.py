"""Exception hierarchy shared by every module."""


class MinRegError(Exception):
    """Base class for all errors raised by minreg."""


class DegenerateConfig(MinRegError, ValueError):
    """The two minimizers coincide (or nearly so)."""


class InvalidConfig(MinRegError, ValueError):
    """A problem or run configuration violates its invariants."""


class UndefinedAtMinimizer(MinRegError, ValueError):
    """An angle or residual was requested at one of the two minimizers."""


class OutOfBall(MinRegError, ValueError):
    """A point lies outside the closed ball of radius bound/sigma."""


class NotOnBallBoundary(MinRegError, ValueError):
    """A point expected on the boundary of a gradient ball is not on it."""


class OutsideBody(MinRegError, ValueError):
    """A point lies outside the convex constraint body."""


class NonpositiveBound(MinRegError, ValueError):
    """The shrunk gradient bound is not positive at some point.

    Attributes:
        report: optional PreconditionReport explaining where it happened.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SeparationTooLarge(MinRegError):
    """The half-distance exceeds (L/2) min(1/sigma1, 1/sigma2).

    Membership queries still work; only boundary tracing is refused.
    """


class ConstrainedTracingRefused(MinRegError):
    """The boundary of the constrained region cannot be traced.

    Attributes:
        report: the PreconditionReport that produced the refusal.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ResolutionTooCoarse(MinRegError):
    """Marching squares found too few boundary cells."""


class NoConvergence(MinRegError, RuntimeError):
    """An iterative minimizer exhausted its iteration budget."""
