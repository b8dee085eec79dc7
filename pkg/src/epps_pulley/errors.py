"""Exception hierarchy shared by all numerical modules."""


class EppsPulleyError(Exception):
    """Base class for every error raised by this package."""


class ContractViolation(EppsPulleyError, ValueError):
    """An argument violates the documented precondition of an operation."""


class SolverFailure(EppsPulleyError, RuntimeError):
    """An iterative method did not converge within its budget."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ConsistencyError(EppsPulleyError, ArithmeticError):
    """A computed quantity violates a structural identity it must satisfy."""


class UnderResolved(SolverFailure):
    """Fewer roots were isolated than requested."""


class DegenerateSample(EppsPulleyError, ValueError):
    """A sample has zero variance, so scaled residuals are undefined."""


class DomainError(EppsPulleyError, ValueError):
    """Moments fall outside the region any distribution can attain."""
