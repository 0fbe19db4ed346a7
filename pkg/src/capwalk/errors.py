"""Exception types shared across the package."""


class CapwalkError(Exception):
    """Base class for all package errors."""


class DomainError(CapwalkError, ValueError):
    """An argument violates an operation's precondition."""


class NumericError(CapwalkError, RuntimeError):
    """A numeric procedure failed to converge or lost accuracy.

    ``payload`` carries diagnostic values (e.g. the last two iterates).
    """

    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload


class ResourceError(CapwalkError, RuntimeError):
    """The requested computation exceeds the configured resource budget."""


class ConfigError(CapwalkError, ValueError):
    """A configuration file or value is invalid."""
