"""Exception types shared across the package.

Validation/parse failures map to CLI exit code 1, everything else to 2.
"""


class CcgError(Exception):
    """Base class for all package errors."""


class ParseError(CcgError):
    """Malformed input text (bad header, non-numeric row, ...)."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(CcgError):
    """Structurally valid input that violates a documented precondition."""


class NoPathError(CcgError):
    """Shortest-path query between disconnected endpoints."""


class EmptyFamilyError(CcgError):
    """Operation that needs at least one strategy ran on an empty family."""


class CapExceededError(CcgError):
    """Enumeration requested on a family larger than the stated cap."""
