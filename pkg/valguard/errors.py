"""
# Errors - exception hierarchy shared by every valguard module
# The CLI maps each family to an exit code
"""


class ValguardError(Exception):
    """Base error for all validation-engine failures."""

    exit_code = 1


class ConfigError(ValguardError):
    """Invalid configuration, flag or specification value."""

    exit_code = 2

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        self.detail = message
        super().__init__(f"{field}: {message}" if field else message)


class PairingError(ConfigError):
    """Reports that cannot be compared as a paired design."""
    pass


class DataError(ValguardError):
    """Unreadable, malformed or non-finite input data."""

    exit_code = 3


class ShapeError(DataError):
    """Non-conformable matrix shapes."""
    pass


class SplitError(DataError):
    """A split policy that cannot be satisfied by the dataset."""
    pass


class DegenerateError(ValguardError):
    """A computation that has no meaningful value on the given data."""

    exit_code = 4


class EmptySelectionError(DegenerateError):
    """Variable selection kept no variable."""
    pass
