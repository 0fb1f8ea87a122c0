"""Exception hierarchy.

CLI exit codes map onto the two broad families: ConfigError -> 2,
DataError -> 3, anything else unexpected -> 4.
"""


class SegrelError(Exception):
    """Base class for all package errors."""


class ConfigError(SegrelError):
    """Invalid configuration or arguments."""


class DataError(SegrelError):
    """Invalid, inconsistent or corrupted input data."""


class TensorFormatError(DataError):
    """Base for tensor-file framing problems."""


class BadMagicError(TensorFormatError):
    """File does not start with the expected magic bytes."""


class UnsupportedVersionError(TensorFormatError):
    """Tensor file declares a version this reader does not speak."""


class TruncatedPayloadError(TensorFormatError):
    """Payload shorter (or longer) than the header-declared size."""


class NonFiniteValuesError(DataError):
    """NaN or infinity where finite values were declared."""


class ChecksumError(DataError):
    """Stored digest does not match file contents."""


class ManifestError(DataError):
    """Manifest schema violation or dangling cross-reference."""
