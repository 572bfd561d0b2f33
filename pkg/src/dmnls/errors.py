"""Exception types raised by the solver and study layers."""


class DMNLSError(Exception):
    """Base class for all package errors."""


class InvalidFieldError(DMNLSError, ValueError):
    pass


class InvalidParameterError(DMNLSError, ValueError):
    pass


class AdmissibilityError(DMNLSError, ValueError):
    """A candidate dispersion map violates one admissibility condition.

    ``condition`` names the violated requirement (``"zero-value"``,
    ``"coverage"``, ``"mean"``, ...).
    """

    def __init__(self, condition, message):
        super().__init__(f"{condition}: {message}")
        self.condition = condition


class DivergenceError(DMNLSError, RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


class NumericalFailureError(DMNLSError, RuntimeError):
    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"{message} at step {step}")
        self.step = step


class AbortedRunError(DMNLSError, RuntimeError):
    """Time integration stopped early; ``last_good_time`` is the last accepted snapshot."""

    def __init__(self, message, last_good_time):
        super().__init__(f"{message} (last good time {last_good_time:.17g})")
        self.last_good_time = last_good_time


class InsufficientSnapshotsError(DMNLSError, ValueError):
    pass


class StudyFailure(DMNLSError, RuntimeError):
    pass


class ConfigError(DMNLSError, ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key
