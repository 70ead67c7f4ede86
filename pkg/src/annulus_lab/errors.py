"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: argument problems exit 2, capacity
problems exit 3 and failed internal consistency checks exit 4.
"""


class LabError(Exception):
    """Base class for all errors raised by annulus_lab."""


class ArgumentError(LabError, ValueError):
    """Bad argument or parameter outside the supported domain."""


class InputRangeError(ArgumentError):
    """Integer input outside the guarded range."""


class CapacityError(LabError):
    """The request would exceed a configured size or memory cap."""


class NumericalError(LabError):
    """An iterative numerical routine failed to converge."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class IntegrityError(LabError):
    """An internal cross-check failed (e.g. exact mass after rounding)."""
