"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: InputError -> 2, ResourceLimit -> 3,
CheckFailed -> 1.  InvariantViolation signals a bug (a guarantee the
algorithms rely on failed), never bad user input.
"""


class PathTSPError(Exception):
    """Base class for all package errors."""


class InputError(PathTSPError):
    """Invalid user input or a violated argument precondition."""


class StructureError(InputError):
    """A graph argument violates a structural precondition (parity, connectivity, coverage)."""


class InvariantViolation(PathTSPError):
    """An internal guarantee failed; indicates a bug, not bad input."""


class ResourceLimit(PathTSPError):
    """A documented enumeration or search budget was exceeded."""


class CheckFailed(PathTSPError):
    """A certified bound or membership check did not hold."""
