"""Exception types shared across the package."""


class QctlError(Exception):
    """Base class for all errors raised by qctl."""


class DimensionError(QctlError, ValueError):
    pass


class ContractViolation(QctlError, ValueError):
    """An input breaks a documented precondition (hermiticity, normalization, ...)."""


class NumericalDomainError(QctlError, ValueError):
    """Non-finite samples or fields."""


class SingularScheduleError(QctlError, ValueError):
    """The phase-function denominator vanishes for the requested schedule."""


class ScheduleDomainError(QctlError, ValueError):
    """A time lies outside the schedule or too close to a stage boundary."""


class ConfigError(QctlError):
    """Invalid command-line or config-file input."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
