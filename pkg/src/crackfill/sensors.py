"""Simulated RGB-D depth camera and laser line scanner.

The depth camera ray-casts every pixel against the heightfield and
reports optical-axis depth (the z coordinate of the hit point in the
camera frame), with multiplicative Gaussian noise. The laser scanner
samples a fixed number of points along a straight line and reports
surface height relative to its reference standoff, with additive
Gaussian noise and a hard validity gate on measuring range.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass

import numpy as np

from .errors import NoIntersection, StationOutsideGrid
from .geometry import CameraIntrinsics, RigidTransform
from .specimen import Heightfield

logger = logging.getLogger(__name__)

SCANNER_POINTS = 1024
SCANNER_RANGE_MM = (200.0, 420.0)
SCANNER_STANDOFF_MM = 310.0
DEFAULT_MASK_THRESHOLD_MM = 0.2

_RAYCAST_ITERATIONS = 16


@dataclass
class DepthImage:
    """Per-pixel optical-axis depth (mm) with a validity mask."""

    depth_mm: np.ndarray
    valid: np.ndarray

    def __post_init__(self) -> None:
        self.depth_mm = np.asarray(self.depth_mm, dtype=float)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.depth_mm.shape != self.valid.shape:
            raise ValueError("depth and validity mask shapes differ")
        if not np.all(np.isfinite(self.depth_mm)):
            raise ValueError("depth image must not contain NaN or inf")

    def to_pgm(self, path) -> None:
        from . import io as _io

        _io.write_depth_pgm(path, self)


@dataclass
class MaskImage:
    """Binary crack mask; True marks crack pixels."""

    flags: np.ndarray

    def __post_init__(self) -> None:
        self.flags = np.asarray(self.flags, dtype=bool)
        if self.flags.ndim != 2:
            raise ValueError("mask must be 2-D")

    def to_pgm(self, path) -> None:
        from . import io as _io

        _io.write_mask_pgm(path, self.flags)


@dataclass
class LaserProfile:
    """One laser line: lateral positions x (mm, scanner frame) and heights z.

    x is strictly increasing with uniform pitch span/(n-1); z is height
    relative to the scanner's reference standoff. Samples outside the
    scanner's measuring range are flagged invalid.
    """

    x: np.ndarray
    z: np.ndarray
    valid: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.x = np.asarray(self.x, dtype=float)
        self.z = np.asarray(self.z, dtype=float)
        if self.valid is None:
            self.valid = np.ones(self.x.shape, dtype=bool)
        self.valid = np.asarray(self.valid, dtype=bool)
        if not (self.x.shape == self.z.shape == self.valid.shape) or self.x.ndim != 1:
            raise ValueError("profile arrays must be 1-D and equally long")
        dx = np.diff(self.x)
        if len(dx) == 0 or np.any(dx <= 0) or not np.allclose(dx, dx[0], rtol=1e-9, atol=1e-12):
            raise ValueError("x must be strictly increasing with uniform pitch")

    @property
    def n_points(self) -> int:
        return len(self.x)

    @property
    def pitch(self) -> float:
        return float(self.x[1] - self.x[0])

    def to_csv(self, path) -> None:
        from . import io as _io

        _io.write_profile_csv(path, self)


@dataclass(frozen=True)
class SensorNoise:
    """Noise model shared by both sensors, fully determined by the seed.

    extrinsic_bias, when present, is a robot-frame perturbation applied
    to the camera mount used for back-projection (the renderer always
    uses the true mount); it models imperfect hand-eye calibration.
    """

    depth_sigma_fraction: float = 0.02
    laser_sigma_mm: float = 0.02
    extrinsic_bias: RigidTransform | None = None
    seed: int = 0

    def generator(self, stream: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, stream])

    def derive(self, *key: int) -> "SensorNoise":
        child = int(np.random.SeedSequence((self.seed,) + key).generate_state(1)[0])
        return dataclasses.replace(self, seed=child)

    @staticmethod
    def noiseless(seed: int = 0) -> "SensorNoise":
        return SensorNoise(depth_sigma_fraction=0.0, laser_sigma_mm=0.0, extrinsic_bias=None, seed=seed)


def _raycast(hf: Heightfield, k: CameraIntrinsics, camera_pose: RigidTransform):
    """Intersect every pixel ray with the heightfield.

    Returns (t, x, y, valid) where t is the optical-axis depth. Rays
    are parameterized with unit z in the camera frame, so the ray
    parameter equals depth. The intersection uses fixed-point iteration
    against the nearest-cell surface height, which converges in one
    step for a camera looking straight down and within a few steps for
    the mild tilts this rig uses.
    """
    us = np.arange(k.image_width, dtype=float)
    vs = np.arange(k.image_height, dtype=float)
    uu, vv = np.meshgrid(us, vs)
    dirs_c = np.stack([(uu - k.px) / k.fx, (vv - k.py) / k.fy, np.ones_like(uu)], axis=-1)
    dirs_0 = dirs_c @ camera_pose.rotation.T
    ox, oy, oz = camera_pose.translation
    dz = dirs_0[..., 2]
    live = np.abs(dz) > 1e-12
    t = np.where(live, (hf.nominal_surface - oz) / np.where(live, dz, 1.0), 0.0)
    for _ in range(_RAYCAST_ITERATIONS):
        x = ox + t * dirs_0[..., 0]
        y = oy + t * dirs_0[..., 1]
        h = hf.height_at(x, y)
        t_new = np.where(live, (h - oz) / np.where(live, dz, 1.0), 0.0)
        if np.allclose(t_new, t, atol=1e-9, rtol=0.0):
            t = t_new
            break
        t = t_new
    x = ox + t * dirs_0[..., 0]
    y = oy + t * dirs_0[..., 1]
    valid = live & (t > 0) & hf.contains(x, y)
    return t, x, y, valid


def render_depth(
    hf: Heightfield,
    k: CameraIntrinsics,
    camera_pose: RigidTransform,
    noise: SensorNoise | None = None,
) -> DepthImage:
    """Render the depth camera view of the specimen.

    Depth is the optical-axis distance to the surface hit, perturbed
    per pixel by Gaussian noise with sigma proportional to depth.
    Raises NoIntersection when no pixel ray hits the grid.
    """
    t, _, _, valid = _raycast(hf, k, camera_pose)
    if not valid.any():
        raise NoIntersection("no camera ray intersects the heightfield")
    depth = np.where(valid, t, 0.0)
    if noise is not None and noise.depth_sigma_fraction > 0:
        rng = noise.generator(0)
        jitter = rng.normal(0.0, 1.0, size=depth.shape) * depth * noise.depth_sigma_fraction
        depth = np.where(valid, depth + jitter, 0.0)
    return DepthImage(depth_mm=depth, valid=valid)


def render_truth_mask(
    hf: Heightfield,
    k: CameraIntrinsics,
    camera_pose: RigidTransform,
    threshold_mm: float = DEFAULT_MASK_THRESHOLD_MM,
) -> MaskImage:
    """Ground-truth segmentation: pixels whose hit point sits below the
    nominal surface by more than threshold_mm."""
    _, x, y, valid = _raycast(hf, k, camera_pose)
    h = hf.height_at(x, y)
    flags = valid & (hf.nominal_surface - h > threshold_mm)
    return MaskImage(flags=flags)


def scan_profile(
    hf: Heightfield,
    laser_pose: RigidTransform,
    span_mm: float,
    noise: SensorNoise | None = None,
    n_points: int = SCANNER_POINTS,
    standoff_mm: float = SCANNER_STANDOFF_MM,
) -> LaserProfile:
    """Sample one laser line across the surface.

    The line runs along the laser frame's x axis, centred on the
    scanner origin; the scanner measures straight down. z is reported
    relative to the reference standoff, so a scanner parked exactly
    standoff_mm above a flat surface reads zero. Samples whose absolute
    range leaves the scanner's measuring window are flagged invalid.
    """
    if span_mm <= 0:
        raise ValueError(f"span must be positive, got {span_mm}")
    if n_points < 2:
        raise ValueError("a profile needs at least 2 points")
    lateral = np.linspace(-span_mm / 2.0, span_mm / 2.0, n_points)
    direction = laser_pose.rotation[:, 0]
    if abs(direction[2]) > 1e-9:
        raise ValueError("laser line must be horizontal (x axis of the laser frame parallel to the surface)")
    ox, oy, oz = laser_pose.translation
    xs = ox + lateral * direction[0]
    ys = oy + lateral * direction[1]
    if not np.all(hf.contains(xs, ys)):
        raise StationOutsideGrid("scan line leaves the heightfield")
    h = hf.height_at(xs, ys)
    distance = oz - h
    valid = (distance >= SCANNER_RANGE_MM[0]) & (distance <= SCANNER_RANGE_MM[1])
    z = h - (oz - standoff_mm)
    if noise is not None and noise.laser_sigma_mm > 0:
        rng = noise.generator(1)
        z = z + rng.normal(0.0, noise.laser_sigma_mm, size=z.shape)
    return LaserProfile(x=lateral, z=z, valid=valid)
