"""Exception types raised by randtest.

Each maps to a distinct CLI exit code (see :mod:`randtest.cli`).
"""


class RandTestError(Exception):
    """Base class for all randtest errors."""


class DesignViolationError(RandTestError, ValueError):
    """The observed assignment is not a member of the declared scheme."""


class GroupStructureError(RandTestError, ValueError):
    """A transformation set offered as a group fails a group axiom."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class EnumerationError(RandTestError):
    """The scheme is too large to enumerate; use sampling instead."""


class EmptySchemeError(RandTestError, ValueError):
    """A scheme would contain no assignment patterns."""
