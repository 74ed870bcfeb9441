"""Exception types shared across the package.

The CLI maps these onto exit codes: input problems exit 1, missing
capabilities exit 2, failed verifications exit 3.
"""


class TLXError(Exception):
    """Base class for all package errors."""


class InputError(TLXError, ValueError):
    """Malformed arguments: bad shapes, out-of-range levels, bad files."""


class SizeError(InputError):
    """A combinatorial enumeration would exceed its cap."""

    def __init__(self, message, count=None):
        super().__init__(message)
        self.count = count


class CapabilityError(TLXError):
    """The requested operation is not available for this problem."""


class VerificationError(TLXError):
    """A numerical check or acceptance assertion failed."""
