"""Exception hierarchy shared by all modules."""


class ShallowCertError(Exception):
    """Base class for package errors."""


class DimensionError(ShallowCertError, ValueError):
    """Shapes, qubit counts or target indices do not line up."""


class InvariantViolation(ShallowCertError, ValueError):
    """A constructed value breaks one of its documented invariants."""


class CapExceeded(ShallowCertError, ValueError):
    """A simulation would exceed the configured dimension cap."""


class ConfigError(ShallowCertError, ValueError):
    """Invalid run configuration; ``field`` names the offending entry."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class BudgetExhausted(ShallowCertError):
    """An iteration or evaluation budget ran out before a decision."""
