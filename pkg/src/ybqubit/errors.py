"""Exception types shared across the package."""


class YbQubitError(Exception):
    """Base class for all package errors."""


class ConstraintViolation(YbQubitError, ValueError):
    """A value violates a documented invariant.

    The offending field name is kept on ``field`` so callers can report it.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class ForbiddenTransitionError(YbQubitError, ValueError):
    pass


class InsufficientDataError(YbQubitError, ValueError):
    pass


class UnderConstrainedError(YbQubitError, ValueError):
    pass


class ScanCoverageError(YbQubitError, RuntimeError):
    pass


class FitError(YbQubitError, RuntimeError):
    pass


class ConfigError(YbQubitError, ValueError):
    pass
