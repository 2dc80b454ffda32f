"""Exception hierarchy.

Every error raised deliberately by the package derives from
:class:`LossyCorrError` so callers can catch one base class.
"""


class LossyCorrError(Exception):
    """Base class for all package errors."""


class ValidationError(LossyCorrError, ValueError):
    """An argument or spec violates a documented invariant."""


class FormatError(LossyCorrError, ValueError):
    """A file or byte stream does not have the expected layout."""


class EmbeddingError(LossyCorrError, RuntimeError):
    """Circulant embedding produced too much negative spectral mass."""


class DegenerateFieldError(LossyCorrError, ValueError):
    """The data carries no variability (e.g. all-zero variogram)."""


class InsufficientDataError(LossyCorrError, ValueError):
    """Too few bins, points or windows to compute a statistic."""


class RankDeficiencyError(LossyCorrError, ValueError):
    """Regression design matrix is rank deficient."""


class SchemaError(LossyCorrError, ValueError):
    """A CSV or config is missing required columns or keys."""


class CodecError(LossyCorrError):
    """Generic codec failure."""


class IntegrityError(CodecError):
    """A compressed blob is truncated or corrupted."""


class VersionError(CodecError):
    """A compressed blob was written by an incompatible codec version."""


class BoundViolationError(CodecError):
    """Reconstruction exceeded the absolute error bound."""


class ExternalCodecError(CodecError):
    """An external compressor command failed."""

    def __init__(self, message, *, command=None, returncode=None, stderr=None):
        super().__init__(message)
        self.command = command
        self.returncode = returncode
        self.stderr = stderr
