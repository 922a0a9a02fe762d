"""Exception hierarchy with stable CLI exit codes.

Exit codes: 2 usage, 3 I/O, 4 validation, 5 numerical. Code 1 is reserved
for unexpected failures.
"""

from __future__ import annotations


class RepgapError(Exception):
    """Base class for all expected failures raised by this package."""

    exit_code = 1


class UsageError(RepgapError):
    """Bad command line or configuration input."""

    exit_code = 2


class InputOutputError(RepgapError):
    """Missing files, unreadable images, malformed binary payloads."""

    exit_code = 3


class ValidationError(RepgapError):
    """Inputs parsed but violate a documented invariant."""

    exit_code = 4


class NumericalError(RepgapError):
    """A numerical routine left its supported regime."""

    exit_code = 5
