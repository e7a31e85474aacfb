class BalayageError(Exception):
    """Base class for errors raised by this package."""


class InvalidInputError(BalayageError, ValueError):
    pass


class NotTransientError(BalayageError):
    """The kernel (or a killed sub-kernel) has spectral radius >= 1."""


class NumericalFailureError(BalayageError):
    pass


class NonConvergenceError(NumericalFailureError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class InternalConsistencyError(BalayageError):
    pass


class VerificationFailure(BalayageError):
    def __init__(self, message, instance=None):
        super().__init__(message)
        self.instance = instance
