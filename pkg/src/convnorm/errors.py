"""Exception hierarchy shared by all convnorm modules."""


class ConvNormError(Exception):
    """Base class for every error raised by convnorm."""


class GeometryError(ConvNormError, ValueError):
    """Invalid convolution geometry (bad sizes, unsupported dilation/groups)."""


class KernelValueError(ConvNormError, ValueError):
    """Kernel has the wrong shape or contains NaN/Inf."""


class AssumptionViolated(ConvNormError):
    """The closed-form norm is only exact when the kernel fits inside the
    unpadded input at a stride-aligned position; raised when it does not."""


class PaddingPresent(ConvNormError):
    """Exact Frobenius norm requested for a padded layer."""


class NonPositiveSigma(ConvNormError, ValueError):
    """Batch-norm standard deviations must be strictly positive."""


class ShapeMismatch(ConvNormError, ValueError):
    """Array shapes disagree with what the operation expects."""


class SizeOverflow(ConvNormError):
    """Materialized operator would exceed the configured entry cap."""


class BlobError(ConvNormError):
    """Malformed tensor blob."""


class BadMagic(BlobError):
    pass


class BadVersion(BlobError):
    pass


class TruncatedPayload(BlobError):
    pass


class UnsupportedDtype(BlobError):
    pass


class ManifestParse(ConvNormError):
    """Model manifest could not be parsed or fails schema checks."""


class MissingBlob(ConvNormError, FileNotFoundError):
    """A blob referenced by a manifest does not exist."""
