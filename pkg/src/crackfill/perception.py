"""Crack perception: mask sources, thinning, and waypoint extraction.

The chain turns a binary crack mask into an ordered list of robot-frame
waypoints: skeletonize the mask to a one-pixel centreline, subsample it
at a minimum pixel spacing, attach depths, back-project through the
camera model, and order the points along the crack's dominant axis.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import EmptyPath, ProviderUnavailable
from .geometry import CameraIntrinsics, Frame, PixelCoord, Point3, RigidTransform, pixel_to_camera, transform_point
from .sensors import DepthImage, MaskImage, render_truth_mask
from .specimen import Heightfield

logger = logging.getLogger(__name__)

DEFAULT_MIN_SPACING_PX = 8.0
_EIGHT_CONNECTED = np.ones((3, 3), dtype=int)


@dataclass
class Skeleton:
    """One-pixel-wide centreline: boolean image plus raster-order pixels."""

    flags: np.ndarray

    def __post_init__(self) -> None:
        self.flags = np.asarray(self.flags, dtype=bool)
        if self.flags.ndim != 2:
            raise ValueError("skeleton must be 2-D")

    def pixels(self) -> list[tuple[int, int]]:
        """Set pixels as (row, col) in raster order."""
        rows, cols = np.nonzero(self.flags)
        return list(zip(rows.tolist(), cols.tolist()))


@dataclass
class Waypoint:
    """A crack point carried through the localization chain."""

    pixel: PixelCoord
    camera_pt: Point3
    robot_pt: Point3
    refined_robot_pt: Point3 | None = None
    area_mm2: float | None = None
    speed_mm_s: float | None = None

    def position(self) -> Point3:
        """Best known robot-frame position (refined when available)."""
        return self.refined_robot_pt if self.refined_robot_pt is not None else self.robot_pt


@dataclass(frozen=True)
class TruthMaskSource:
    """Mask source backed by the simulator's ground truth."""

    hf: Heightfield
    intrinsics: CameraIntrinsics
    camera_pose: RigidTransform
    threshold_mm: float = 0.2

    def provide(self) -> MaskImage:
        return render_truth_mask(self.hf, self.intrinsics, self.camera_pose, self.threshold_mm)


@dataclass(frozen=True)
class FileMaskSource:
    """Mask source reading an externally produced PGM segmentation."""

    path: str
    threshold: int = 128

    def provide(self) -> MaskImage:
        from . import io as _io

        if not Path(self.path).is_file():
            raise ProviderUnavailable(f"mask file not found: {self.path}")
        img, _ = _io.read_pgm(self.path)
        return MaskImage(flags=binarize(img, self.threshold))


def segment(source) -> MaskImage:
    """Obtain a crack mask from whichever segmentation source is configured."""
    return source.provide()


def binarize(image, threshold: float) -> np.ndarray:
    """Pixels at or above threshold become crack pixels."""
    data = image.flags if isinstance(image, MaskImage) else np.asarray(image)
    return data >= threshold


def _neighbours(img: np.ndarray) -> list[np.ndarray]:
    """The 8 neighbours of every pixel, clockwise from north."""
    p = np.pad(img, 1, constant_values=False)
    return [
        p[:-2, 1:-1],  # N
        p[:-2, 2:],    # NE
        p[1:-1, 2:],   # E
        p[2:, 2:],     # SE
        p[2:, 1:-1],   # S
        p[2:, :-2],    # SW
        p[1:-1, :-2],  # W
        p[:-2, :-2],   # NW
    ]


def _transitions(nb: list[np.ndarray]) -> np.ndarray:
    """Count of 0->1 transitions around the cyclic neighbour sequence."""
    total = np.zeros(nb[0].shape, dtype=int)
    for a, b in zip(nb, nb[1:] + nb[:1]):
        total += (~a) & b
    return total


def _protect_components(img: np.ndarray, deletions: np.ndarray) -> np.ndarray:
    """Drop deletions that would erase an entire connected component."""
    if not deletions.any():
        return deletions
    labels, n = ndimage.label(img, structure=_EIGHT_CONNECTED)
    if n == 0:
        return deletions
    total = ndimage.sum_labels(np.ones_like(labels), labels, index=np.arange(1, n + 1))
    doomed = ndimage.sum_labels(deletions.astype(float), labels, index=np.arange(1, n + 1))
    for comp in np.nonzero(doomed >= total)[0] + 1:
        rows, cols = np.nonzero((labels == comp) & deletions)
        deletions[rows[0], cols[0]] = False
    return deletions


def skeletonize(mask) -> Skeleton:
    """Two-subiteration thinning to a one-pixel-wide skeleton.

    Runs the classic parallel thinning to a fixpoint: each pass deletes
    boundary pixels whose neighbourhood has 2..6 set neighbours, exactly
    one 0->1 transition, and the directional corner products zero (the
    two subiterations alternate which corners). Deletions that would
    erase a whole component are withheld so every input component keeps
    at least one pixel, and a final sweep dissolves any residual 2x2
    blocks so no set pixel has a fully set 2x2 neighbourhood.
    """
    img = (mask.flags if isinstance(mask, MaskImage) else np.asarray(mask, dtype=bool)).copy()
    while True:
        changed = False
        for phase in (0, 1):
            nb = _neighbours(img)
            b = sum(n.astype(int) for n in nb)
            a = _transitions(nb)
            north, east, south, west = nb[0], nb[2], nb[4], nb[6]
            if phase == 0:
                corner1 = ~(north & east & south)
                corner2 = ~(east & south & west)
            else:
                corner1 = ~(north & east & west)
                corner2 = ~(north & south & west)
            deletions = img & (b >= 2) & (b <= 6) & (a == 1) & corner1 & corner2
            deletions = _protect_components(img, deletions)
            if deletions.any():
                img[deletions] = False
                changed = True
        if not changed:
            break
    _dissolve_squares(img)
    return Skeleton(flags=img)


def _safe_to_delete(img: np.ndarray, r: int, c: int) -> bool:
    """A deletion keeps local connectivity when the pixel's neighbourhood
    has exactly one 0->1 transition and 2..6 set neighbours."""
    rows = img[max(r - 1, 0) : r + 2, max(c - 1, 0) : c + 2]
    if rows.shape != (3, 3):
        padded = np.zeros((3, 3), dtype=bool)
        padded[
            (0 if r > 0 else 1) : (3 if r < img.shape[0] - 1 else 2),
            (0 if c > 0 else 1) : (3 if c < img.shape[1] - 1 else 2),
        ] = rows
        rows = padded
    seq = [rows[0, 1], rows[0, 2], rows[1, 2], rows[2, 2], rows[2, 1], rows[2, 0], rows[1, 0], rows[0, 0]]
    b = sum(bool(v) for v in seq)
    a = sum((not x) and y for x, y in zip(seq, seq[1:] + seq[:1]))
    return a == 1 and 2 <= b <= 6


def _dissolve_squares(img: np.ndarray) -> None:
    """Remove one pixel from every remaining fully set 2x2 block."""
    while True:
        block = img[:-1, :-1] & img[:-1, 1:] & img[1:, :-1] & img[1:, 1:]
        rows, cols = np.nonzero(block)
        if len(rows) == 0:
            return
        r, c = int(rows[0]), int(cols[0])
        corners = [(r, c), (r, c + 1), (r + 1, c), (r + 1, c + 1)]
        victim = next((p for p in corners if _safe_to_delete(img, *p)), None)
        if victim is None:
            # fall back to the least-connected corner
            nb_counts = [img[max(rr - 1, 0) : rr + 2, max(cc - 1, 0) : cc + 2].sum() for rr, cc in corners]
            victim = corners[int(np.argmin(nb_counts))]
            logger.debug("dissolving 2x2 block at %s without a connectivity-safe corner", victim)
        img[victim] = False


def extract_pixels(skeleton: Skeleton, depth: DepthImage, min_spacing_px: float = DEFAULT_MIN_SPACING_PX) -> list[PixelCoord]:
    """Subsample the skeleton at a minimum Euclidean pixel spacing.

    Pixels are visited in the skeleton's raster order and kept greedily
    when at least min_spacing_px from every kept pixel. Depth per kept
    pixel is the median of valid depths in its 3x3 neighbourhood; a
    pixel with no valid depth nearby is dropped with a warning. An empty
    skeleton yields an empty list (with a warning), not an error.
    """
    pts = skeleton.pixels()
    if not pts:
        logger.warning("empty skeleton: no crack pixels to extract")
        return []
    kept: list[tuple[int, int]] = []
    for r, c in pts:
        if all((r - kr) ** 2 + (c - kc) ** 2 >= min_spacing_px**2 for kr, kc in kept):
            kept.append((r, c))
    out: list[PixelCoord] = []
    h, w = depth.depth_mm.shape
    for r, c in kept:
        r0, r1 = max(r - 1, 0), min(r + 2, h)
        c0, c1 = max(c - 1, 0), min(c + 2, w)
        window = depth.depth_mm[r0:r1, c0:c1]
        ok = depth.valid[r0:r1, c0:c1]
        if not ok.any():
            logger.warning("dropping skeleton pixel (%d, %d): no valid depth in 3x3 window", r, c)
            continue
        out.append(PixelCoord(u=float(c), v=float(r), depth=float(np.median(window[ok]))))
    return out


def pixels_to_robot(pixels: list[PixelCoord], k: CameraIntrinsics, camera_to_robot: RigidTransform) -> list[Waypoint]:
    """Back-project pixels and carry them into the robot base frame."""
    out = []
    for px in pixels:
        cam = pixel_to_camera(px, k)
        robot = transform_point(cam, camera_to_robot, Frame.ROBOT)
        out.append(Waypoint(pixel=px, camera_pt=cam, robot_pt=robot))
    return out


def order_path(waypoints: list[Waypoint]) -> list[Waypoint]:
    """Order waypoints along the crack's dominant axis.

    Sort ascending by robot x when the x extent is at least the y
    extent, otherwise by robot y; ties fall back to the other
    coordinate. The input list is not modified.
    """
    if not waypoints:
        raise EmptyPath("cannot order an empty waypoint list")
    xs = [wp.position().x for wp in waypoints]
    ys = [wp.position().y for wp in waypoints]
    if (max(xs) - min(xs)) >= (max(ys) - min(ys)):
        key = lambda wp: (wp.position().x, wp.position().y)
    else:
        key = lambda wp: (wp.position().y, wp.position().x)
    return sorted(waypoints, key=key)
