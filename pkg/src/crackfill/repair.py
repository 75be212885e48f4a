"""Repair pipeline: laser refinement, fill planning, execution, validation.

This module wires the perception, profiling, and deposition layers into
the full repair loop: RGB-D waypoints are corrected by laser line
scans, a fill plan assigns per-segment speeds (adaptive or fixed), the
extruder executes it, and a post-fill rescan at the same stations
scores the fill error per station. The two experiment drivers at the
bottom reproduce the localization-accuracy and adaptive-versus-fixed
comparisons end to end.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import AllPointsDropped, EmptyWaypoints, NoEdges
from .geometry import (
    CameraIntrinsics,
    Frame,
    Orientation,
    Point3,
    RigidTransform,
    compose,
    laser_correction,
    rotation_about_z,
    transform_point,
)
from .perception import (
    DEFAULT_MIN_SPACING_PX,
    Skeleton,
    Waypoint,
    TruthMaskSource,
    extract_pixels,
    order_path,
    pixels_to_robot,
    segment,
    skeletonize,
)
from .profile import (
    DEFAULT_MIN_SEPARATION,
    CalibrationModel,
    EDGE_THRESHOLD_SIGMA_FACTOR,
    ProfileFeatures,
    measure,
    speed_for_area,
)
from .sensors import (
    DEFAULT_MASK_THRESHOLD_MM,
    SCANNER_STANDOFF_MM,
    DepthImage,
    MaskImage,
    SensorNoise,
    render_depth,
    scan_profile,
)
from .specimen import CrackSpec, DepositionParams, DepositResult, Heightfield, deposit, generate_specimen

logger = logging.getLogger(__name__)

DEFAULT_AREA_FLOOR_MM2 = 1.0
DEFAULT_SCAN_SPAN_MM = 40.0

# noise stream labels for deriving per-stage seeds
_STREAM_REFINE = 2
_STREAM_VALIDATE = 3
_STREAM_SCANS = 10


def edge_threshold_for(noise: SensorNoise | None) -> float:
    """Edge rejection threshold adapted to the configured laser noise."""
    if noise is None or noise.laser_sigma_mm <= 0:
        return 1e-9
    return EDGE_THRESHOLD_SIGMA_FACTOR * noise.laser_sigma_mm


def fill_error(area_pre_mm2: float, area_post_mm2: float) -> float:
    """Absolute normalized residual |A_post / A_pre| of one station."""
    return abs(area_post_mm2 / area_pre_mm2)


@dataclass(frozen=True)
class ScanStation:
    """Where and how one laser scan was taken, so it can be reproduced."""

    x_mm: float
    y_mm: float
    scanner_z_mm: float
    orientation: Orientation
    span_mm: float
    standoff_mm: float

    def pose(self) -> RigidTransform:
        rotation = np.eye(3) if self.orientation == Orientation.HORIZONTAL else rotation_about_z(math.pi / 2)
        return RigidTransform(rotation, np.array([self.x_mm, self.y_mm, self.scanner_z_mm]), Frame.LASER, Frame.ROBOT)


@dataclass
class RefinementResult:
    """Survivors of the laser refinement pass, with their measurements."""

    waypoints: list[Waypoint]
    features: list[ProfileFeatures]
    stations: list[ScanStation]
    dropped: int


@dataclass(frozen=True)
class FillMode:
    """Speed policy for a fill: calibrated-adaptive or constant."""

    kind: str
    fixed_speed_mm_s: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("adaptive", "fixed"):
            raise ValueError(f"unknown fill mode {self.kind!r}")
        if self.kind == "fixed" and (self.fixed_speed_mm_s is None or self.fixed_speed_mm_s <= 0):
            raise ValueError("fixed mode needs a positive speed")

    @staticmethod
    def adaptive() -> "FillMode":
        return FillMode(kind="adaptive")

    @staticmethod
    def fixed(speed_mm_s: float) -> "FillMode":
        return FillMode(kind="fixed", fixed_speed_mm_s=speed_mm_s)

    def label(self) -> str:
        if self.kind == "adaptive":
            return "adaptive"
        return f"{self.fixed_speed_mm_s:g}"


@dataclass
class FillPlan:
    """Ordered waypoints with per-segment speeds already assigned."""

    waypoints: list[Waypoint]
    mode: FillMode


@dataclass(frozen=True)
class ExecutionResult:
    elapsed_s: float
    segments: tuple[DepositResult, ...]


@dataclass(frozen=True)
class StationRecord:
    station: int
    area_pre_mm2: float
    area_post_mm2: float
    fill_error: float | None
    speed_mm_s: float
    included: bool


@dataclass(frozen=True)
class FillReport:
    """Per-station fill errors and their summary statistics."""

    records: tuple[StationRecord, ...]
    mean_fill_error: float
    std_fill_error: float
    median_fill_error: float
    elapsed_s: float
    mode: FillMode

    def included_errors(self) -> list[float]:
        return [r.fill_error for r in self.records if r.included]

    def to_csv(self, path) -> None:
        from . import io as _io

        with open(path, "w", newline="\n") as f:
            f.write("station,area_pre_mm2,area_post_mm2,fill_error,speed_mm_s\n")
            for r in self.records:
                err = _io.fmt(r.fill_error) if r.included else ""
                f.write(f"{r.station},{_io.fmt(r.area_pre_mm2)},{_io.fmt(r.area_post_mm2)},{err},{_io.fmt(r.speed_mm_s)}\n")

    def summary_dict(self) -> dict:
        return {
            "mean": self.mean_fill_error,
            "std": self.std_fill_error,
            "median": self.median_fill_error,
            "time_s": self.elapsed_s,
            "mode": self.mode.label(),
        }

    def to_json(self, path) -> None:
        from . import io as _io

        _io.write_json(path, self.summary_dict())


@dataclass(frozen=True)
class AxisStats:
    mean_abs_mm: float
    std_mm: float


@dataclass(frozen=True)
class LocalizationReport:
    """Aggregate gap between RGB-D-only and laser-refined coordinates."""

    x: AxisStats
    y: AxisStats
    z: AxisStats
    mean_distance_mm: float
    n_pairs: int
    refined_lateral_mean_mm: float
    refined_lateral_max_mm: float

    def to_dict(self) -> dict:
        return {
            "X": {"average_difference_mm": self.x.mean_abs_mm, "std_dev_mm": self.x.std_mm},
            "Y": {"average_difference_mm": self.y.mean_abs_mm, "std_dev_mm": self.y.std_mm},
            "Z": {"average_difference_mm": self.z.mean_abs_mm, "std_dev_mm": self.z.std_mm},
            "Distance": {"average_difference_mm": self.mean_distance_mm},
            "n_pairs": self.n_pairs,
            "diagnostics": {
                "refined_lateral_mean_mm": self.refined_lateral_mean_mm,
                "refined_lateral_max_mm": self.refined_lateral_max_mm,
            },
        }

    def to_json(self, path) -> None:
        from . import io as _io

        _io.write_json(path, self.to_dict())


@dataclass(frozen=True)
class RepairScene:
    """Everything needed to rebuild the specimen and run the sensors.

    crack may be None for an undamaged specimen; the pipeline then
    fails with EmptyPath at perception, which is the expected outcome.
    """

    crack: CrackSpec | None
    grid_origin: tuple[float, float]
    cell_size_mm: float
    nx: int
    ny: int
    intrinsics: CameraIntrinsics
    camera_pose: RigidTransform
    laser_mount: RigidTransform
    nominal_surface_mm: float = 0.0
    scan_span_mm: float = DEFAULT_SCAN_SPAN_MM
    scan_standoff_mm: float = SCANNER_STANDOFF_MM
    min_spacing_px: float = DEFAULT_MIN_SPACING_PX
    mask_threshold_mm: float = DEFAULT_MASK_THRESHOLD_MM
    area_floor_mm2: float = DEFAULT_AREA_FLOOR_MM2

    def orientation(self) -> Orientation:
        return self.crack.orientation if self.crack is not None else Orientation.HORIZONTAL

    def build_specimen(self) -> Heightfield:
        if self.crack is None:
            return Heightfield.flat(
                self.grid_origin, self.cell_size_mm, self.nx, self.ny, self.nominal_surface_mm
            )
        return generate_specimen(
            self.crack,
            origin=self.grid_origin,
            cell_size=self.cell_size_mm,
            nx=self.nx,
            ny=self.ny,
            nominal_surface=self.nominal_surface_mm,
        )


@dataclass
class PerceptionResult:
    depth: DepthImage
    mask: MaskImage
    skeleton: Skeleton
    waypoints: list[Waypoint]


def perceive(scene: RepairScene, hf: Heightfield, noise: SensorNoise | None, mask_source=None) -> PerceptionResult:
    """Run the RGB-D localization chain on the current surface.

    Rendering always uses the true camera mount; back-projection uses
    the mount perturbed by the noise model's extrinsic bias, exactly
    like a miscalibrated hand-eye transform would.
    """
    depth = render_depth(hf, scene.intrinsics, scene.camera_pose, noise)
    if mask_source is None:
        mask_source = TruthMaskSource(hf, scene.intrinsics, scene.camera_pose, scene.mask_threshold_mm)
    mask = segment(mask_source)
    skeleton = skeletonize(mask)
    pixels = extract_pixels(skeleton, depth, scene.min_spacing_px)
    pose_used = scene.camera_pose
    if noise is not None and noise.extrinsic_bias is not None:
        pose_used = compose(noise.extrinsic_bias, scene.camera_pose)
    waypoints = pixels_to_robot(pixels, scene.intrinsics, pose_used)
    ordered = order_path(waypoints)
    return PerceptionResult(depth=depth, mask=mask, skeleton=skeleton, waypoints=ordered)


def refine_waypoints(
    waypoints: list[Waypoint],
    hf: Heightfield,
    *,
    laser_mount: RigidTransform,
    orientation: Orientation,
    span_mm: float = DEFAULT_SCAN_SPAN_MM,
    standoff_mm: float = SCANNER_STANDOFF_MM,
    noise: SensorNoise | None = None,
    min_separation: int = DEFAULT_MIN_SEPARATION,
) -> RefinementResult:
    """Correct each waypoint with a laser line scan across the crack.

    The scanner parks above each RGB-D-derived point, profiles the
    crack, and the measured centre offsets (lateral and height) are
    mapped through the laser mount into a robot-frame correction added
    to the waypoint. Waypoints whose scan shows no crack are dropped
    with a warning; if none survive AllPointsDropped is raised.
    """
    threshold = edge_threshold_for(noise)
    survivors: list[Waypoint] = []
    features: list[ProfileFeatures] = []
    stations: list[ScanStation] = []
    dropped = 0
    mount_offset = laser_mount.translation
    for i, wp in enumerate(waypoints):
        station = ScanStation(
            x_mm=wp.robot_pt.x + mount_offset[0],
            y_mm=wp.robot_pt.y + mount_offset[1],
            scanner_z_mm=wp.robot_pt.z + mount_offset[2] + standoff_mm,
            orientation=orientation,
            span_mm=span_mm,
            standoff_mm=standoff_mm,
        )
        scan_noise = noise.derive(_STREAM_REFINE, i) if noise is not None else None
        prof = scan_profile(hf, station.pose(), span_mm, scan_noise, standoff_mm=standoff_mm)
        try:
            feats = measure(prof, threshold, min_separation)
        except NoEdges:
            logger.warning("waypoint %d: no crack under the laser, dropping", i)
            dropped += 1
            continue
        # The height correction is the crack centre's position relative to
        # the scanner's reference plane (centre height is reported relative
        # to the local baseline, so the baseline is added back). Parked on
        # a perfectly localized waypoint the scanner reads zero and the
        # correction vanishes; any RGB-D depth error shows up here and is
        # cancelled.
        height = feats.centre_height_mm + feats.baseline_mm
        correction = laser_correction(feats.centre_offset_mm, height, orientation)
        corr_robot = transform_point(correction, laser_mount, Frame.ROBOT)
        wp.refined_robot_pt = Point3(
            wp.robot_pt.x + corr_robot.x,
            wp.robot_pt.y + corr_robot.y,
            wp.robot_pt.z + corr_robot.z,
            Frame.ROBOT,
        )
        wp.area_mm2 = feats.area_mm2
        survivors.append(wp)
        features.append(feats)
        stations.append(station)
    if not survivors:
        raise AllPointsDropped("laser refinement dropped every waypoint")
    return RefinementResult(waypoints=survivors, features=features, stations=stations, dropped=dropped)


def plan_fill(
    waypoints: list[Waypoint],
    mode: FillMode,
    model: CalibrationModel | None = None,
    interpolate: bool = False,
) -> FillPlan:
    """Order the waypoints and assign a travel speed to each segment.

    Adaptive mode converts each waypoint's measured area to a speed via
    the calibration model; fixed mode applies one speed throughout.
    """
    if not waypoints:
        raise EmptyWaypoints("cannot plan a fill without waypoints")
    ordered = order_path(waypoints)
    for wp in ordered:
        if mode.kind == "adaptive":
            if model is None:
                raise ValueError("adaptive fill planning requires a calibration model")
            if wp.area_mm2 is None:
                raise ValueError("adaptive fill planning requires laser-measured areas; run refine_waypoints first")
            wp.speed_mm_s = speed_for_area(model, wp.area_mm2, interpolate)
        else:
            wp.speed_mm_s = float(mode.fixed_speed_mm_s)
    return FillPlan(waypoints=ordered, mode=mode)


def execute_fill(hf: Heightfield, plan: FillPlan, params: DepositionParams) -> ExecutionResult:
    """Run the extruder along the planned path, segment by segment.

    Each segment between consecutive waypoints is deposited at the
    starting waypoint's speed; interior segment ends are left to the
    following segment so no cross-section is deposited twice. Elapsed
    time is purge time plus the sum of segment length over speed.
    """
    elapsed = params.purge_time_s
    segments: list[DepositResult] = []
    pts = plan.waypoints
    for i in range(len(pts) - 1):
        a = pts[i].position()
        b = pts[i + 1].position()
        result = deposit(
            hf,
            (a.x, a.y),
            (b.x, b.y),
            pts[i].speed_mm_s,
            params,
            include_end=(i == len(pts) - 2),
        )
        segments.append(result)
        elapsed += result.elapsed_s
    return ExecutionResult(elapsed_s=elapsed, segments=tuple(segments))


def validate(
    stations: list[ScanStation],
    pre_features: list[ProfileFeatures],
    hf_filled: Heightfield,
    *,
    noise: SensorNoise | None,
    elapsed_s: float,
    mode: FillMode,
    area_floor_mm2: float = DEFAULT_AREA_FLOOR_MM2,
    min_separation: int = DEFAULT_MIN_SEPARATION,
) -> FillReport:
    """Rescan every pre-fill station and score the fill.

    The fill error at a station is |post area / pre area| using unsigned
    deviation areas, so over- and under-fill cannot cancel. If the
    post-fill profile no longer shows edges (the fill levelled the
    surface) the post area integrates the residual deviation over the
    pre-fill window instead. Stations whose pre-fill area is below
    area_floor_mm2 are excluded from the statistics.
    """
    threshold = edge_threshold_for(noise)
    records: list[StationRecord] = []
    errors: list[float] = []
    for i, (station, pre) in enumerate(zip(stations, pre_features)):
        scan_noise = noise.derive(_STREAM_VALIDATE, i) if noise is not None else None
        prof = scan_profile(hf_filled, station.pose(), station.span_mm, scan_noise, standoff_mm=station.standoff_mm)
        try:
            post = measure(prof, threshold, min_separation)
            area_post = post.area_mm2
        except NoEdges:
            idx = np.arange(prof.n_points)
            outside = ((idx < pre.left_index - 10) | (idx > pre.right_index + 10)) & prof.valid
            baseline = float(np.median(prof.z[outside])) if outside.any() else float(np.median(prof.z))
            window = prof.z[pre.left_index : pre.right_index + 1]
            area_post = float(np.sum(np.abs(window - baseline)) * prof.pitch)
        included = pre.area_mm2 >= area_floor_mm2
        err = fill_error(pre.area_mm2, area_post) if included else None
        if not included:
            logger.info("station %d excluded from fill statistics: pre area %.3f below floor", i, pre.area_mm2)
        else:
            errors.append(err)
        speed = 0.0
        records.append(
            StationRecord(
                station=i,
                area_pre_mm2=pre.area_mm2,
                area_post_mm2=area_post,
                fill_error=err,
                speed_mm_s=speed,
                included=included,
            )
        )
    if errors:
        mean = float(np.mean(errors))
        std = float(np.std(errors, ddof=1)) if len(errors) > 1 else 0.0
        median = float(np.median(errors))
    else:
        logger.warning("no station qualified for fill statistics")
        mean = std = median = float("nan")
    return FillReport(
        records=tuple(records),
        mean_fill_error=mean,
        std_fill_error=std,
        median_fill_error=median,
        elapsed_s=elapsed_s,
        mode=mode,
    )


@dataclass
class FillRunArtifacts:
    """Everything a fill run produces, for export and inspection."""

    perception: PerceptionResult
    refinement: RefinementResult
    plan: FillPlan
    execution: ExecutionResult
    surface_before: Heightfield
    surface_after: Heightfield
    report: FillReport


def run_fill(
    scene: RepairScene,
    mode: FillMode,
    params: DepositionParams,
    noise: SensorNoise | None,
    model: CalibrationModel | None = None,
    mask_source=None,
    interpolate: bool = False,
) -> FillRunArtifacts:
    """Run the complete repair pipeline once on a fresh specimen."""
    hf = scene.build_specimen()
    surface_before = hf.copy()
    perception = perceive(scene, hf, noise, mask_source)
    refinement = refine_waypoints(
        perception.waypoints,
        hf,
        laser_mount=scene.laser_mount,
        orientation=scene.orientation(),
        span_mm=scene.scan_span_mm,
        standoff_mm=scene.scan_standoff_mm,
        noise=noise,
    )
    plan = plan_fill(refinement.waypoints, mode, model, interpolate)
    execution = execute_fill(hf, plan, params)
    report = validate(
        refinement.stations,
        refinement.features,
        hf,
        noise=noise,
        elapsed_s=execution.elapsed_s,
        mode=mode,
        area_floor_mm2=scene.area_floor_mm2,
    )
    report = _attach_speeds(report, plan)
    return FillRunArtifacts(
        perception=perception,
        refinement=refinement,
        plan=plan,
        execution=execution,
        surface_before=surface_before,
        surface_after=hf,
        report=report,
    )


def _attach_speeds(report: FillReport, plan: FillPlan) -> FillReport:
    """Fill in the per-station planned speed in the report records."""
    speeds = [wp.speed_mm_s for wp in plan.waypoints]
    records = tuple(
        StationRecord(
            station=r.station,
            area_pre_mm2=r.area_pre_mm2,
            area_post_mm2=r.area_post_mm2,
            fill_error=r.fill_error,
            speed_mm_s=speeds[i] if i < len(speeds) else 0.0,
            included=r.included,
        )
        for i, r in enumerate(report.records)
    )
    return FillReport(
        records=records,
        mean_fill_error=report.mean_fill_error,
        std_fill_error=report.std_fill_error,
        median_fill_error=report.median_fill_error,
        elapsed_s=report.elapsed_s,
        mode=report.mode,
    )


def table2_experiment(
    scene: RepairScene,
    params: DepositionParams,
    model: CalibrationModel,
    noise: SensorNoise | None,
    fixed_speeds: tuple[float, ...] = (6.0, 8.0, 10.0, 15.0, 20.0),
) -> list[FillReport]:
    """Fixed-speed sweep plus adaptive run, each on an identical fresh specimen."""
    modes = [FillMode.fixed(v) for v in fixed_speeds] + [FillMode.adaptive()]
    reports = []
    for mode in modes:
        artifacts = run_fill(scene, mode, params, noise, model)
        reports.append(artifacts.report)
        logger.info(
            "fill mode %s: mean error %.3f, elapsed %.1f s",
            mode.label(),
            artifacts.report.mean_fill_error,
            artifacts.report.elapsed_s,
        )
    return reports


def _distance_to_centreline(path, x: float, y: float) -> float:
    """Lateral distance from (x, y) to the crack centreline.

    The first and last segments are extended past the path endpoints
    because the carved crack reaches half a width beyond them (the end
    caps); a waypoint on a cap is laterally on the centreline even
    though it lies past the path's own extent.
    """
    pts = np.asarray(path, dtype=float)
    n_seg = len(pts) - 1
    best = math.inf
    for i, (a, b) in enumerate(zip(pts[:-1], pts[1:])):
        d = b - a
        seg2 = float(d @ d)
        if seg2 == 0:
            continue
        t = ((x - a[0]) * d[0] + (y - a[1]) * d[1]) / seg2
        lo = -math.inf if i == 0 else 0.0
        hi = math.inf if i == n_seg - 1 else 1.0
        t = min(max(t, lo), hi)
        px, py = a + t * d
        best = min(best, math.hypot(x - px, y - py))
    return best


def build_localization_report(
    pairs: list[tuple[Point3, Point3]],
    lateral_errors: list[float],
) -> LocalizationReport:
    """Summarize (RGB-D point, refined point) pairs like a localization table."""
    if not pairs:
        raise EmptyWaypoints("no coordinate pairs to report")
    diffs = np.array([[a.x - b.x, a.y - b.y, a.z - b.z] for a, b in pairs])
    absd = np.abs(diffs)
    std = absd.std(axis=0, ddof=1) if len(pairs) > 1 else np.zeros(3)
    dist = np.linalg.norm(diffs, axis=1)
    lat = np.asarray(lateral_errors, dtype=float)
    return LocalizationReport(
        x=AxisStats(float(absd[:, 0].mean()), float(std[0])),
        y=AxisStats(float(absd[:, 1].mean()), float(std[1])),
        z=AxisStats(float(absd[:, 2].mean()), float(std[2])),
        mean_distance_mm=float(dist.mean()),
        n_pairs=len(pairs),
        refined_lateral_mean_mm=float(lat.mean()) if lat.size else 0.0,
        refined_lateral_max_mm=float(lat.max()) if lat.size else 0.0,
    )


def localization_experiment(
    scene: RepairScene,
    noise: SensorNoise | None,
    n_scans: int = 10,
) -> LocalizationReport:
    """Repeatedly localize the same crack and compare RGB-D against laser.

    Each scan renders a fresh noisy depth image, extracts and
    back-projects waypoints (through the biased mount when the noise
    model carries one), refines them with the laser, and accumulates
    per-axis absolute differences. The refined points' distance to the
    true crack centreline is tracked as a diagnostic.
    """
    hf = scene.build_specimen()
    pairs: list[tuple[Point3, Point3]] = []
    lateral: list[float] = []
    for s in range(n_scans):
        scan_noise = noise.derive(_STREAM_SCANS, s) if noise is not None else None
        perception = perceive(scene, hf, scan_noise)
        refinement = refine_waypoints(
            perception.waypoints,
            hf,
            laser_mount=scene.laser_mount,
            orientation=scene.orientation(),
            span_mm=scene.scan_span_mm,
            standoff_mm=scene.scan_standoff_mm,
            noise=scan_noise,
        )
        for wp in refinement.waypoints:
            pairs.append((wp.robot_pt, wp.refined_robot_pt))
            lateral.append(_distance_to_centreline(scene.crack.path, wp.refined_robot_pt.x, wp.refined_robot_pt.y))
    return build_localization_report(pairs, lateral)
