"""Exception types shared across the package."""


class CutmixLpError(ValueError):
    """Base class for all contract violations raised by this package."""


class GeometryError(CutmixLpError):
    """Shapes, box bounds, or class counts do not line up."""


class ConfigError(CutmixLpError):
    """A configuration value is invalid or required inputs are missing."""


class ManifestError(CutmixLpError):
    """A dataset manifest failed to parse or validate."""


class RtenError(CutmixLpError):
    """Base class for raw tensor file format errors."""


class BadMagicError(RtenError):
    """File does not start with the RTEN magic bytes."""


class DimOverflowError(RtenError):
    """A dimension does not fit the format's u32 range or is implausibly large."""


class TruncatedPayloadError(RtenError):
    """File ended before the full payload was read."""
