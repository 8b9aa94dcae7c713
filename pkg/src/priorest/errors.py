"""Exception hierarchy shared across the package."""


class PriorestError(Exception):
    """Base class for all package errors."""


class ValidationError(PriorestError, ValueError):
    """Input violates a documented invariant (Hermiticity, trace, PSD, ...)."""


class DomainError(PriorestError, ValueError):
    """Argument outside the domain where the quantity is defined."""


class ResourceError(PriorestError, ValueError):
    """Requested object would exceed the supported size."""


class ModelInconsistencyError(ValidationError):
    """The derivative has support where no SLD can reproduce it."""


class SolverError(PriorestError, RuntimeError):
    """A numerical solver failed to produce a usable result."""


class RankDeficientError(PriorestError, ValueError):
    """Operation requires a full-rank state."""
