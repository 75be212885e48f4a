"""Laser profile analysis: edge detection, area measurement, calibration.

A crack (or a printed strip) shows up in a laser line as a region
whose first difference carries two large opposite-signed excursions,
one per wall. Edges are located there, the cross-section area is the
unsigned deviation from a robust baseline integrated between them, and
the crack centre is read at the midpoint sample.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientSamples, NoEdges, NonMonotonicCalibration
from .sensors import LaserProfile

logger = logging.getLogger(__name__)

# Flat-profile rejection must survive sensor noise: first differences of
# iid Gaussian samples have sigma*sqrt(2), and the expected maximum over
# ~1000 samples stays below 6 sigma. Default matches the default laser
# noise of 0.02 mm.
EDGE_THRESHOLD_SIGMA_FACTOR = 6.0
DEFAULT_EDGE_THRESHOLD_MM = 0.12
DEFAULT_MIN_SEPARATION = 5
DEFAULT_BASELINE_MARGIN = 10

# A ramp (sloped wall) spreads one edge over many samples of nearly
# equal first difference; treat everything within this fraction of the
# local extremum as the same wall when locating its outer end.
_PLATEAU_FRACTION = 0.5


@dataclass(frozen=True)
class ProfileFeatures:
    """Measured crack features in one laser profile.

    Indices bound the deviation window (left_index < right_index);
    centre_offset_mm is the lateral position of the crack centre in
    scanner coordinates and centre_height_mm its height relative to
    the baseline (negative inside a trough, positive on a bead).
    """

    left_index: int
    right_index: int
    left_x_mm: float
    right_x_mm: float
    baseline_mm: float
    area_mm2: float
    centre_offset_mm: float
    centre_height_mm: float

    def __post_init__(self) -> None:
        if self.left_index >= self.right_index:
            raise ValueError("left edge must precede right edge")
        if self.area_mm2 < 0:
            raise ValueError("area must be non-negative")


@dataclass(frozen=True)
class CalibrationSample:
    speed_mm_s: float
    area_mm2: float
    std_mm2: float


@dataclass(frozen=True)
class CalibrationModel:
    """Inverse-speed deposition model A(v) = Q / v fitted to strip prints."""

    samples: tuple[CalibrationSample, ...]
    flow_rate_mm3_s: float
    v_min: float
    v_max: float

    def __post_init__(self) -> None:
        if self.flow_rate_mm3_s <= 0:
            raise ValueError("fitted flow rate must be positive")
        if not (0 < self.v_min <= self.v_max):
            raise ValueError("speed clamp range is invalid")

    def to_dict(self) -> dict:
        return {
            "samples": [
                {"speed": s.speed_mm_s, "area": s.area_mm2, "std": s.std_mm2} for s in self.samples
            ],
            "Q": self.flow_rate_mm3_s,
            "v_min": self.v_min,
            "v_max": self.v_max,
        }

    @staticmethod
    def from_dict(d: dict) -> "CalibrationModel":
        samples = tuple(
            CalibrationSample(float(s["speed"]), float(s["area"]), float(s["std"])) for s in d["samples"]
        )
        return CalibrationModel(samples, float(d["Q"]), float(d["v_min"]), float(d["v_max"]))


def _plateau_end(d: np.ndarray, index: int, direction: int) -> int:
    """Walk from a first-difference extremum to the outer end of its wall."""
    floor = _PLATEAU_FRACTION * abs(d[index])
    sign = np.sign(d[index])
    j = index
    while 0 <= j + direction < len(d) and np.sign(d[j + direction]) == sign and abs(d[j + direction]) >= floor:
        j += direction
    return j


def detect_edges(
    profile: LaserProfile,
    edge_threshold_mm: float = DEFAULT_EDGE_THRESHOLD_MM,
    min_separation: int = DEFAULT_MIN_SEPARATION,
) -> tuple[int, int]:
    """Locate the two crack walls as opposite-signed first-difference extrema.

    The second wall must lie at least min_separation samples from the
    first and have the opposite sign. Each wall's index is pushed to
    the outer end of its near-equal run so that sloped walls (ramps)
    resolve to the foot of the ramp rather than an arbitrary sample on
    it. Raises NoEdges when no such pair exceeds the threshold.
    """
    d = np.diff(profile.z)
    pair_valid = profile.valid[1:] & profile.valid[:-1]
    mag = np.where(pair_valid, np.abs(d), -np.inf)
    first = int(np.argmax(mag))
    if not np.isfinite(mag[first]) or mag[first] <= edge_threshold_mm:
        raise NoEdges("no first-difference excursion above threshold")
    idx = np.arange(len(d))
    opposite = pair_valid & (np.sign(d) == -np.sign(d[first])) & (np.abs(idx - first) >= min_separation)
    if not opposite.any():
        raise NoEdges("no opposite-signed wall at sufficient separation")
    mag2 = np.where(opposite, np.abs(d), -np.inf)
    second = int(np.argmax(mag2))
    if mag2[second] <= edge_threshold_mm:
        raise NoEdges("opposite wall does not exceed threshold")
    if first < second:
        left, right = _plateau_end(d, first, -1), _plateau_end(d, second, +1)
    else:
        left, right = _plateau_end(d, second, -1), _plateau_end(d, first, +1)
    return left, right


def measure(
    profile: LaserProfile,
    edge_threshold_mm: float = DEFAULT_EDGE_THRESHOLD_MM,
    min_separation: int = DEFAULT_MIN_SEPARATION,
    baseline_margin: int = DEFAULT_BASELINE_MARGIN,
) -> ProfileFeatures:
    """Measure the crack cross-section bounded by the detected edges.

    The baseline is the median height outside the edge window padded by
    baseline_margin samples; the area integrates unsigned deviation
    from it, so troughs and beads (and mixtures) measure alike.
    """
    left, right = detect_edges(profile, edge_threshold_mm, min_separation)
    idx = np.arange(profile.n_points)
    outside = ((idx < left - baseline_margin) | (idx > right + baseline_margin)) & profile.valid
    if outside.any():
        baseline = float(np.median(profile.z[outside]))
    else:
        logger.warning("edge window spans the whole profile; baseline falls back to global median")
        baseline = float(np.median(profile.z[profile.valid]))
    window = profile.z[left : right + 1]
    area = float(np.sum(np.abs(window - baseline)) * profile.pitch)
    centre = (left + right) // 2
    return ProfileFeatures(
        left_index=left,
        right_index=right,
        left_x_mm=float(profile.x[left]),
        right_x_mm=float(profile.x[right]),
        baseline_mm=baseline,
        area_mm2=area,
        centre_offset_mm=float(profile.x[centre]),
        centre_height_mm=float(profile.z[centre] - baseline),
    )


def calibrate(
    strip_scans: list[tuple[float, list[LaserProfile]]],
    edge_threshold_mm: float = DEFAULT_EDGE_THRESHOLD_MM,
    min_separation: int = DEFAULT_MIN_SEPARATION,
) -> CalibrationModel:
    """Fit the extrusion model A(v) = Q / v from strip-print scans.

    Per speed the area is averaged over that strip's profiles; the flow
    rate is the closed-form least squares solution
    Q = sum(A_i / v_i) / sum(1 / v_i^2) over the per-speed means.
    Needs at least two distinct speeds with two profiles each.
    """
    by_speed: dict[float, list[LaserProfile]] = {}
    for speed, profiles in strip_scans:
        by_speed.setdefault(float(speed), []).extend(profiles)
    if len(by_speed) < 2:
        raise InsufficientSamples(f"calibration needs >= 2 distinct speeds, got {len(by_speed)}")
    samples = []
    for speed in sorted(by_speed):
        profiles = by_speed[speed]
        if len(profiles) < 2:
            raise InsufficientSamples(f"speed {speed} mm/s has {len(profiles)} profiles, needs >= 2")
        areas = np.array([measure(p, edge_threshold_mm, min_separation).area_mm2 for p in profiles])
        samples.append(CalibrationSample(speed, float(areas.mean()), float(areas.std(ddof=1))))
    means = np.array([s.area_mm2 for s in samples])
    if np.any(np.diff(means) >= 0):
        warnings.warn("mean strip areas do not strictly decrease with speed", NonMonotonicCalibration)
    speeds = np.array([s.speed_mm_s for s in samples])
    flow = float(np.sum(means / speeds) / np.sum(1.0 / speeds**2))
    return CalibrationModel(tuple(samples), flow, float(speeds.min()), float(speeds.max()))


def speed_for_area(model: CalibrationModel, area_mm2: float, interpolate: bool = False) -> float:
    """Travel speed that deposits the given cross-section, clamped to the
    calibrated range. Zero area asks for no material: fastest speed.

    By default the fitted constant-flow model v = Q / A is inverted.
    With interpolate=True the per-speed sample means are interpolated
    piecewise-linearly in inverse speed instead, which tracks pumps
    whose flow rate drifts with speed.
    """
    if area_mm2 < 0:
        raise ValueError(f"area must be non-negative, got {area_mm2}")
    if area_mm2 == 0:
        return model.v_max
    if interpolate:
        order = np.argsort([s.area_mm2 for s in model.samples])
        areas = np.array([model.samples[i].area_mm2 for i in order])
        inv_v = np.array([1.0 / model.samples[i].speed_mm_s for i in order])
        inv = float(np.interp(area_mm2, areas, inv_v))
        return float(np.clip(1.0 / inv, model.v_min, model.v_max))
    return float(np.clip(model.flow_rate_mm3_s / area_mm2, model.v_min, model.v_max))
