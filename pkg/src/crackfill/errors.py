"""Exception types raised by the crackfill pipeline.

Everything derives from CrackFillError so callers can catch pipeline
failures without masking programming errors (TypeError, etc.).
"""

from __future__ import annotations


class CrackFillError(Exception):
    """Base class for all pipeline errors."""


class NonPositiveDepth(CrackFillError):
    """Back-projection was asked for a pixel with depth <= 0."""


class FrameMismatch(CrackFillError):
    """A point tagged with one frame was fed to a transform expecting another."""


class PathOutsideGrid(CrackFillError):
    """A crack path (plus its half-width) does not fit inside the heightfield."""


class StationOutsideGrid(CrackFillError):
    """A cross-section or scan station lies outside the heightfield."""


class SegmentOutsideGrid(CrackFillError):
    """A deposition segment endpoint lies outside the heightfield."""


class ZeroSpeed(CrackFillError):
    """Deposition was requested at zero or negative travel speed."""


class NoIntersection(CrackFillError):
    """No camera ray intersects the heightfield surface."""


class ProviderUnavailable(CrackFillError):
    """A segmentation mask source cannot deliver a mask (e.g. missing file)."""


class EmptyPath(CrackFillError):
    """Path ordering was requested for an empty waypoint list."""


class EmptyWaypoints(CrackFillError):
    """A fill plan was requested for an empty waypoint list."""


class NoEdges(CrackFillError):
    """No opposite-signed edge pair above threshold exists in a laser profile."""


class InsufficientSamples(CrackFillError):
    """Calibration needs at least two speeds with at least two profiles each."""


class AllPointsDropped(CrackFillError):
    """Laser refinement dropped every waypoint (no crack under any scan)."""


class ConfigError(CrackFillError):
    """A scenario configuration is malformed or fails schema validation."""


class NonMonotonicCalibration(UserWarning):
    """Mean strip areas do not strictly decrease with speed."""
