"""Exception hierarchy shared by all modules."""


class SparseCDError(Exception):
    """Base class for errors raised by sparsecd."""


class InvalidArgumentError(SparseCDError, ValueError):
    """Bad input: wrong shape, empty variable set, out-of-range parameter."""


class PreconditionError(InvalidArgumentError):
    """Input violates a structural precondition (e.g. a non-chordal graph)."""


class SingularMomentMatrixError(SparseCDError):
    """Moment matrix is not positive definite, even after jitter."""


class NumericOverflowError(SparseCDError, ArithmeticError):
    """A computed quantity left the representable floating-point range."""
