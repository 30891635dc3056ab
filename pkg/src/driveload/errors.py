"""Exception types shared across the toolkit."""


class DriveloadError(Exception):
    """Base class for all toolkit errors."""


class ParseError(DriveloadError):
    """A file could not be parsed. Carries the offending line number."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class InvariantViolation(DriveloadError):
    """A value or data structure violates one of its declared invariants."""


class InsufficientDataError(DriveloadError):
    """Not enough data to fit or evaluate a model component."""
