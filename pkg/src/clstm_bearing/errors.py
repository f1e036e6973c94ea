"""Exception types raised across the package.

Everything derives from :class:`ClstmError` so the CLI can map library
failures to exit codes without catching unrelated exceptions.
"""


class ClstmError(Exception):
    pass


class DataFormatError(ClstmError, ValueError):
    """Malformed or unsupported input data (CLI exit status 2)."""


class NotWavError(DataFormatError):
    pass


class UnsupportedFormatError(DataFormatError):
    pass


class TruncatedFileError(DataFormatError):
    pass


class BadMagicError(DataFormatError):
    pass


class VersionMismatchError(DataFormatError):
    pass


class ShapeMismatchError(DataFormatError):
    pass


class EmptyInputError(ClstmError, ValueError):
    pass


class EmptySetError(ClstmError, ValueError):
    pass


class BadRangeError(ClstmError, ValueError):
    pass


class BadPositionError(ClstmError, ValueError):
    pass


class NonPositiveRpmError(ClstmError, ValueError):
    pass


class BadConfigError(ClstmError, ValueError):
    pass


class TinyBatchError(ClstmError, ValueError):
    pass


class OddWidthError(ClstmError, ValueError):
    pass


class BadRateError(ClstmError, ValueError):
    pass


class BadTargetError(ClstmError, ValueError):
    pass


class EmptySplitError(ClstmError, ValueError):
    pass


class BatchTooLargeError(ClstmError, ValueError):
    pass


class NoNegativesError(ClstmError, ValueError):
    pass


class DivergenceError(ClstmError, ArithmeticError):
    """Training produced a non-finite loss (CLI exit status 3)."""
