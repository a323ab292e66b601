"""Exception types shared across the package."""


class KernelRegError(Exception):
    """Base class for all package errors."""


class DomainError(KernelRegError, ValueError):
    """A hyperparameter or argument is outside its admissible domain.

    The message names the violated bound, e.g. ``"lambda=1.0 violates
    0 <= lambda <= 1 - 1e-6"``.
    """


class UnsupportedKernelError(KernelRegError, TypeError):
    """The requested operation is not defined for this kernel family."""


class NumericalError(KernelRegError, RuntimeError):
    """A numerical procedure failed (factorization, inversion, ...)."""

    def __init__(self, message, jitter=None):
        super().__init__(message)
        self.jitter = jitter


class TuningError(KernelRegError, RuntimeError):
    """Hyperparameter tuning failed at every start point."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class UndefinedFitError(KernelRegError, ValueError):
    """The fit metric is undefined (constant reference response)."""
