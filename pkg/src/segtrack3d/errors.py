"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes: ConfigError -> 2,
LayoutError -> 3, anything else derived from SegTrackError -> 4.
"""


class SegTrackError(Exception):
    """Base class for all package errors."""


class ConfigError(SegTrackError):
    """Invalid or inconsistent configuration."""


class LayoutError(SegTrackError):
    """Missing, malformed, or inconsistent input/output files."""


class UnknownLabelError(SegTrackError):
    """A nucleus label was requested that is not present in the volume."""


class EmptySeedError(SegTrackError):
    """No usable seeds remain for watershed flooding."""


class MetricsError(SegTrackError):
    """Scoring inputs are inconsistent (dims, lineage/mask mismatch, empty truth)."""
