"""Desk-scale simulator for an autonomous crack detection and filling rig.

The package models the full repair loop on synthetic specimens: a
heightfield with a carved crack is imaged by a simulated RGB-D camera,
the crack is segmented, skeletonized, and back-projected into robot
coordinates, a laser line scanner refines each waypoint and measures
the local cross-section, an extrusion model fills the crack at either
a fixed or an area-adaptive speed, and a post-fill rescan scores the
result. Everything is deterministic for a given configuration and seed.
"""

from .config import ScenarioConfig
from .errors import (
    AllPointsDropped,
    ConfigError,
    CrackFillError,
    EmptyPath,
    EmptyWaypoints,
    FrameMismatch,
    InsufficientSamples,
    NoEdges,
    NoIntersection,
    NonMonotonicCalibration,
    NonPositiveDepth,
    PathOutsideGrid,
    ProviderUnavailable,
    SegmentOutsideGrid,
    StationOutsideGrid,
    ZeroSpeed,
)
from .geometry import (
    CameraIntrinsics,
    Frame,
    Orientation,
    PixelCoord,
    Point3,
    RigidTransform,
    axis_angle_rotation,
    compose,
    invert,
    laser_correction,
    pixel_to_camera,
    rotation_about_x,
    rotation_about_y,
    rotation_about_z,
    transform_point,
)
from .perception import (
    FileMaskSource,
    Skeleton,
    TruthMaskSource,
    Waypoint,
    binarize,
    extract_pixels,
    order_path,
    pixels_to_robot,
    segment,
    skeletonize,
)
from .profile import (
    CalibrationModel,
    CalibrationSample,
    ProfileFeatures,
    calibrate,
    detect_edges,
    measure,
    speed_for_area,
)
from .repair import (
    AxisStats,
    ExecutionResult,
    FillMode,
    FillPlan,
    FillReport,
    FillRunArtifacts,
    LocalizationReport,
    PerceptionResult,
    RefinementResult,
    RepairScene,
    ScanStation,
    StationRecord,
    build_localization_report,
    edge_threshold_for,
    execute_fill,
    fill_error,
    localization_experiment,
    perceive,
    plan_fill,
    refine_waypoints,
    run_fill,
    table2_experiment,
    validate,
)
from .sensors import (
    DepthImage,
    LaserProfile,
    MaskImage,
    SensorNoise,
    render_depth,
    render_truth_mask,
    scan_profile,
)
from .specimen import (
    CrackSpec,
    DepositionParams,
    DepositResult,
    Heightfield,
    deposit,
    generate_specimen,
    true_cross_section,
)

__version__ = "0.1.0"

__all__ = [
    "AllPointsDropped",
    "AxisStats",
    "CalibrationModel",
    "CalibrationSample",
    "CameraIntrinsics",
    "ConfigError",
    "CrackFillError",
    "CrackSpec",
    "DepositResult",
    "DepositionParams",
    "DepthImage",
    "EmptyPath",
    "EmptyWaypoints",
    "ExecutionResult",
    "FileMaskSource",
    "FillMode",
    "FillPlan",
    "FillReport",
    "FillRunArtifacts",
    "Frame",
    "FrameMismatch",
    "Heightfield",
    "InsufficientSamples",
    "LaserProfile",
    "LocalizationReport",
    "MaskImage",
    "NoEdges",
    "NoIntersection",
    "NonMonotonicCalibration",
    "NonPositiveDepth",
    "Orientation",
    "PathOutsideGrid",
    "PerceptionResult",
    "PixelCoord",
    "Point3",
    "ProfileFeatures",
    "ProviderUnavailable",
    "RefinementResult",
    "RepairScene",
    "RigidTransform",
    "ScanStation",
    "ScenarioConfig",
    "SegmentOutsideGrid",
    "SensorNoise",
    "Skeleton",
    "StationOutsideGrid",
    "StationRecord",
    "TruthMaskSource",
    "Waypoint",
    "ZeroSpeed",
    "axis_angle_rotation",
    "binarize",
    "build_localization_report",
    "calibrate",
    "compose",
    "deposit",
    "detect_edges",
    "edge_threshold_for",
    "execute_fill",
    "extract_pixels",
    "fill_error",
    "generate_specimen",
    "invert",
    "laser_correction",
    "localization_experiment",
    "measure",
    "order_path",
    "perceive",
    "pixel_to_camera",
    "pixels_to_robot",
    "plan_fill",
    "refine_waypoints",
    "render_depth",
    "render_truth_mask",
    "rotation_about_x",
    "rotation_about_y",
    "rotation_about_z",
    "run_fill",
    "scan_profile",
    "segment",
    "skeletonize",
    "speed_for_area",
    "table2_experiment",
    "transform_point",
    "true_cross_section",
    "validate",
]
