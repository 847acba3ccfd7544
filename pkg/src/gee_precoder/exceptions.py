"""Error types raised across the package."""


class GeePrecoderError(Exception):
    """Base class for all package errors."""


class ConfigError(GeePrecoderError):
    """Invalid system configuration."""


class DimensionError(GeePrecoderError):
    """Array arguments with inconsistent shapes."""


class ShapingMatrixError(GeePrecoderError):
    """Norm-bounded shaping matrix is singular or not Hermitian PD."""


class DecoderRankError(GeePrecoderError):
    """Decoder is rank deficient where an invertible Gram matrix is needed."""


class DegeneratePowerError(GeePrecoderError):
    """Total consumed power is zero, the efficiency ratio is undefined."""


class SdpError(GeePrecoderError):
    """Malformed SDP problem (non-affine or non-Hermitian constraint maps,
    oversized blocks, missing interior point for a log-det objective)."""
