"""Exception hierarchy shared by all modules."""


class HPMEError(Exception):
    """Base class for every error raised by the package."""


class DomainError(HPMEError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConstructionError(HPMEError):
    """A model function or barrier could not be built from the given parameters."""


class ConstraintError(HPMEError):
    """A parameter constraint required by a barrier construction is violated."""

    def __init__(self, message, margin=None):
        super().__init__(message)
        self.margin = margin


class SolverError(HPMEError):
    """An ODE integration or a nonlinear time step failed."""


class VerificationError(HPMEError):
    """A nodewise inequality check failed; ``report`` carries the offending node."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report or {}
