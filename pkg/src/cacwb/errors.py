"""Exception hierarchy shared by the library and the CLI exit codes."""


class CacError(Exception):
    """Base class for workbench errors."""


class ValidationError(CacError, ValueError):
    """A parameter or configuration violates a documented invariant."""


class DegenerateInputError(CacError, ValueError):
    """Inputs sit on a singular point of a formula (zero denominator)."""


class DimensionError(ValidationError):
    """Profile, distribution or rate vectors disagree in shape."""


class NonConvergenceError(CacError, RuntimeError):
    """Fixed-point iteration hit its iteration cap.

    The last iterate is kept on ``report`` so callers can still emit it.
    """

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report
