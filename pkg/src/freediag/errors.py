"""Exception and warning types raised by freediag."""


class FreeDiagError(Exception):
    """Base class for all errors raised by this package."""


class InvalidDescriptor(FreeDiagError, ValueError):
    pass


class SingularElement(FreeDiagError, ZeroDivisionError):
    pass


class NotPositive(FreeDiagError, ValueError):
    pass


class NotSelfadjoint(FreeDiagError, ValueError):
    pass


class NotInHalfPlane(FreeDiagError, ValueError):
    pass


class InvalidModel(FreeDiagError, ValueError):
    pass


class DimensionMismatch(InvalidModel):
    pass


class NoConvergence(FreeDiagError, ArithmeticError):
    """An iterative solver stopped before reaching its tolerance.

    Attributes
    ----------
    iterations : int
        Number of iterations performed.
    residual : float
        Last residual (or step size) seen by the solver.
    """

    def __init__(self, message, iterations=0, residual=float("nan")):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class DegenerateSample(FreeDiagError, ValueError):
    pass


class MonotonicityViolation(FreeDiagError, ArithmeticError):
    pass


class LadderFailure(FreeDiagError, ArithmeticError):
    def __init__(self, message, rung=None):
        super().__init__(message)
        self.rung = rung


class InconsistentProfile(FreeDiagError, ArithmeticError):
    pass


class InvalidSpec(FreeDiagError, ValueError):
    pass


class LinearSolveFailure(FreeDiagError, ArithmeticError):
    pass


class NonMonotoneWarning(UserWarning):
    """A ladder sequence is not eventually monotone in some coordinate."""
