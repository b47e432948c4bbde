"""Exception types shared across the toolkit."""


class LowLightError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(LowLightError, ValueError):
    """Invalid configuration: inverted ranges, unknown keys, bad profile files."""


class DimensionError(LowLightError, ValueError):
    """Image or mosaic has a shape the operation cannot accept."""


class DomainError(LowLightError, ValueError):
    """Input values fall outside the operation's domain (e.g. negative ADU)."""


class StructuralError(LowLightError, ValueError):
    """Misaligned rasters, missing assets, or malformed records."""


class EmptyReportError(LowLightError, ValueError):
    """Scoring was asked to aggregate zero records."""


class AssetError(LowLightError, OSError):
    """An input asset could not be read or decoded."""
