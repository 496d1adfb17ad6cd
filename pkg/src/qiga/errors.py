"""Exception hierarchy shared by every qiga module."""

from __future__ import annotations


class QigaError(Exception):
    """Base exception raised for engine, problem and CLI failures."""


class NormalizationError(QigaError):
    """Raised when amplitudes cannot form a normalised qubit."""


class ScheduleError(QigaError):
    """Raised when a lengthening schedule cannot be built."""


class ChromosomeError(QigaError):
    """Raised for invalid chromosome resizes or length mismatches."""


class RotationTableError(QigaError):
    """Raised for unknown lookup rows or a malformed rotation table file."""


class OperatorError(QigaError):
    """Raised when a genetic operator receives invalid input."""


class ProblemError(QigaError):
    """Raised when a problem cannot evaluate the supplied phenotype."""


class IdxFormatError(QigaError):
    """Base class for IDX file decoding failures."""


class IdxMagicError(IdxFormatError):
    """Raised when an IDX header carries an unexpected magic number."""


class IdxTruncatedError(IdxFormatError):
    """Raised when an IDX payload is shorter than its header announces."""


class IdxCountMismatchError(IdxFormatError):
    """Raised when image and label files disagree on the sample count."""


class SpecError(QigaError):
    """Raised for unknown keys or invalid values in an experiment spec file."""
