"""Exception types raised across the package."""


class LoopSoupError(Exception):
    pass


class ValidationError(LoopSoupError, ValueError):
    """Input violates a model or operation precondition."""


class DimensionMismatch(LoopSoupError, ValueError):
    pass


class SingularMatrix(LoopSoupError, ArithmeticError):
    """A matrix that should be invertible was not (numerically)."""


class ResourceLimit(LoopSoupError, RuntimeError):
    """A brute-force routine would exceed its size guard."""


class ConvergenceFailure(LoopSoupError, RuntimeError):
    pass
