"""Exception hierarchy shared by all solver modules."""


class LipApproxError(Exception):
    """Base class for every error raised by this package."""


class DegenerateExtent(LipApproxError, ValueError):
    pass


class DisconnectedDomain(LipApproxError, ValueError):
    pass


class NonFiniteSample(LipApproxError, ValueError):
    pass


class GridMismatch(LipApproxError, ValueError):
    pass


class EmptySourceSet(LipApproxError, ValueError):
    pass


class UnmaskedSource(LipApproxError, ValueError):
    pass


class NonConvexValueFunction(LipApproxError, RuntimeError):
    """The DP value function lost convexity; indicates a bug, not bad input."""


class IndexOutOfRange(LipApproxError, IndexError):
    pass


class UnsupportedExponent(LipApproxError, ValueError):
    pass


class InfeasibleInput(LipApproxError, ValueError):
    pass


class InfeasibleSegment(LipApproxError, ValueError):
    pass


class NonFiniteEnergy(LipApproxError, FloatingPointError):
    pass


class LineSearchStalled(LipApproxError, RuntimeError):
    pass


class MaxIterExceeded(LipApproxError, RuntimeError):
    """Raised only in strict mode; carries the best iterate found."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
