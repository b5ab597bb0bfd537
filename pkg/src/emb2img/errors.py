"""Error classes shared across the toolkit.

Every error that can surface at the CLI carries a stable nonzero exit code so
scripted callers can branch on failure class. The service reports the class
name in its error payload and the CLI maps it back through EXIT_CODES.
"""


class ToolkitError(Exception):
    """Base class for all toolkit failures."""

    exit_code = 1


class IOFailure(ToolkitError):
    """Missing file, permission problem, or other OS-level I/O error."""

    exit_code = 2


class InvalidInput(ToolkitError):
    """Request violates an operation precondition (bad flag combination,
    unnormalized dataset passed to training, and similar)."""

    exit_code = 3


# --- binary format errors ---------------------------------------------------

class MalformedHeader(ToolkitError):
    exit_code = 10


class DimensionMismatch(ToolkitError):
    exit_code = 11


class NonFiniteValue(ToolkitError):
    exit_code = 12


class DuplicateName(ToolkitError):
    exit_code = 13


# --- embedding / projection errors ------------------------------------------

class BandwidthSearchFailed(ToolkitError):
    exit_code = 20


class NumericalDivergence(ToolkitError):
    exit_code = 21


class DegenerateInput(ToolkitError):
    exit_code = 22


class ZeroExtent(ToolkitError):
    exit_code = 23


# --- rasterization / model errors --------------------------------------------

class LengthMismatch(ToolkitError):
    exit_code = 24


class ShapeMismatch(ToolkitError):
    exit_code = 25


class MissingWeight(ToolkitError):
    exit_code = 26


class BatchTooSmall(ToolkitError):
    exit_code = 27


class IndexOutOfRange(ToolkitError):
    exit_code = 28


_ERROR_CLASSES = [
    ToolkitError, IOFailure, InvalidInput,
    MalformedHeader, DimensionMismatch, NonFiniteValue, DuplicateName,
    BandwidthSearchFailed, NumericalDivergence, DegenerateInput, ZeroExtent,
    LengthMismatch, ShapeMismatch, MissingWeight, BatchTooSmall,
    IndexOutOfRange,
]

EXIT_CODES = {cls.__name__: cls.exit_code for cls in _ERROR_CLASSES}


def exit_code_for(error_name: str) -> int:
    """Exit code for an error class name; unknown names map to 1."""
    return EXIT_CODES.get(error_name, 1)
