"""Sensor tests with closed-form oracles: a straight-down camera over a
flat plate must read the mount height at every pixel, a scanner parked
at its standoff must read zero, and noise statistics must match the
configured sigmas."""

import numpy as np
import pytest

from crackfill import (
    DepthImage,
    Frame,
    LaserProfile,
    MaskImage,
    NoIntersection,
    RigidTransform,
    SensorNoise,
    StationOutsideGrid,
    render_depth,
    render_truth_mask,
    scan_profile,
)
from crackfill.sensors import SCANNER_POINTS, SCANNER_RANGE_MM
from conftest import CAMERA_DOWN, camera_pose, down_scan_pose, make_flat, make_rect_crack


class TestRenderDepth:
    def test_flat_plate_reads_mount_height_everywhere(self, intrinsics):
        """Straight-down camera, flat plate at z=0: depth is exactly 500."""
        hf = make_flat(nx=400, ny=400, cell=0.5, origin=(-100.0, -100.0))
        img = render_depth(hf, intrinsics, camera_pose(height_mm=500.0))
        assert img.valid.any()
        assert np.all(img.depth_mm[img.valid] == pytest.approx(500.0, abs=1e-9))

    def test_trough_pixels_read_deeper(self, intrinsics):
        hf = make_rect_crack(width=8.0, depth=2.0, cell=0.1)
        img = render_depth(hf, intrinsics, camera_pose(height_mm=500.0, y=75.0))
        vals = img.depth_mm[img.valid]
        assert vals.max() == pytest.approx(502.0, abs=1e-9)
        assert vals.min() == pytest.approx(500.0, abs=1e-9)

    def test_depth_noise_statistics(self, intrinsics):
        hf = make_flat(nx=400, ny=400, cell=0.5, origin=(-100.0, -100.0))
        noise = SensorNoise(depth_sigma_fraction=0.02, laser_sigma_mm=0.0, seed=3)
        img = render_depth(hf, intrinsics, camera_pose(height_mm=500.0), noise)
        vals = img.depth_mm[img.valid]
        assert vals.mean() == pytest.approx(500.0, rel=1e-3)
        assert vals.std() == pytest.approx(10.0, rel=0.02)

    def test_noiseless_flag_and_zero_sigma_match(self, intrinsics):
        hf = make_flat(nx=200, ny=200, cell=0.5, origin=(-50.0, -50.0))
        a = render_depth(hf, intrinsics, camera_pose(), SensorNoise.noiseless())
        b = render_depth(hf, intrinsics, camera_pose(), None)
        np.testing.assert_array_equal(a.depth_mm, b.depth_mm)

    def test_same_seed_same_image(self, intrinsics):
        hf = make_flat(nx=200, ny=200, cell=0.5, origin=(-50.0, -50.0))
        a = render_depth(hf, intrinsics, camera_pose(), SensorNoise(seed=42))
        b = render_depth(hf, intrinsics, camera_pose(), SensorNoise(seed=42))
        c = render_depth(hf, intrinsics, camera_pose(), SensorNoise(seed=43))
        np.testing.assert_array_equal(a.depth_mm, b.depth_mm)
        assert not np.array_equal(a.depth_mm, c.depth_mm)

    def test_camera_facing_away_raises(self, intrinsics):
        hf = make_flat(nx=200, ny=200, cell=0.5, origin=(-50.0, -50.0))
        up = RigidTransform(np.eye(3), [0.0, 0.0, 500.0], Frame.CAMERA, Frame.ROBOT)
        with pytest.raises(NoIntersection):
            render_depth(hf, intrinsics, up)

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            DepthImage(depth_mm=np.zeros((4, 4)), valid=np.ones((3, 3), dtype=bool))


class TestRenderTruthMask:
    def test_flat_plate_has_empty_mask(self, intrinsics):
        hf = make_flat(nx=400, ny=400, cell=0.5, origin=(-100.0, -100.0))
        mask = render_truth_mask(hf, intrinsics, camera_pose())
        assert not mask.flags.any()

    def test_band_width_matches_projected_width(self, intrinsics):
        """An 8 mm crack at 500 mm with fx=600 covers 9.6 px; the mask rows
        crossing the crack must flag 9 to 11 columns each."""
        hf = make_rect_crack(width=8.0, depth=5.0, cell=0.1)
        mask = render_truth_mask(hf, intrinsics, camera_pose(height_mm=500.0, y=75.0))
        counts = mask.flags.sum(axis=1)
        rows = counts[counts > 0]
        assert rows.size > 50
        # rows at the crack tips only graze the trough; check the interior
        interior = rows[2:-2]
        assert interior.min() >= 9
        assert interior.max() <= 11

    def test_threshold_excludes_shallow_damage(self, intrinsics):
        hf = make_rect_crack(width=8.0, depth=0.15, cell=0.1)
        mask = render_truth_mask(hf, intrinsics, camera_pose(y=75.0), threshold_mm=0.2)
        assert not mask.flags.any()
        deep = render_truth_mask(hf, intrinsics, camera_pose(y=75.0), threshold_mm=0.1)
        assert deep.flags.any()

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            MaskImage(flags=np.zeros(16, dtype=bool))


class TestScanProfile:
    def test_flat_surface_reads_zero_at_standoff(self):
        hf = make_flat(nx=400, ny=400, cell=0.5, origin=(-100.0, -100.0))
        prof = scan_profile(hf, down_scan_pose(z=310.0), span_mm=40.0)
        assert prof.n_points == SCANNER_POINTS
        assert np.all(prof.valid)
        np.testing.assert_allclose(prof.z, 0.0, atol=1e-12)
        np.testing.assert_allclose(prof.x[[0, -1]], [-20.0, 20.0], atol=1e-12)

    def test_rect_trough_reads_negative_depth(self):
        hf = make_rect_crack(width=8.0, depth=2.0, cell=0.1)
        prof = scan_profile(hf, down_scan_pose(y=75.0, z=310.0), span_mm=40.0)
        interior = np.abs(prof.x) < 3.0
        outside = np.abs(prof.x) > 5.0
        np.testing.assert_allclose(prof.z[interior], -2.0, atol=1e-12)
        np.testing.assert_allclose(prof.z[outside], 0.0, atol=1e-12)
        crossing = np.nonzero(np.abs(np.diff(prof.z)) > 1.0)[0]
        assert crossing.size == 2
        # walls land within a sample pitch plus a grid cell of x = +/-4
        np.testing.assert_allclose(np.abs(prof.x[crossing]), 4.0, atol=2.0 * prof.pitch + hf.cell_size)

    def test_laser_noise_statistics(self):
        hf = make_flat(nx=400, ny=400, cell=0.5, origin=(-100.0, -100.0))
        noise = SensorNoise(depth_sigma_fraction=0.0, laser_sigma_mm=0.05, seed=9)
        zs = []
        for i in range(40):
            prof = scan_profile(hf, down_scan_pose(z=310.0), span_mm=40.0, noise=noise.derive(i))
            zs.append(prof.z)
        z = np.concatenate(zs)
        assert z.mean() == pytest.approx(0.0, abs=5e-4)
        assert z.std() == pytest.approx(0.05, rel=0.02)

    def test_derived_streams_differ(self):
        hf = make_flat(nx=200, ny=200, cell=0.5, origin=(-50.0, -50.0))
        noise = SensorNoise(laser_sigma_mm=0.05, seed=1)
        a = scan_profile(hf, down_scan_pose(), 40.0, noise=noise.derive(0))
        b = scan_profile(hf, down_scan_pose(), 40.0, noise=noise.derive(1))
        a2 = scan_profile(hf, down_scan_pose(), 40.0, noise=noise.derive(0))
        np.testing.assert_array_equal(a.z, a2.z)
        assert not np.array_equal(a.z, b.z)

    def test_range_gate_flags_out_of_window_samples(self):
        hf = make_flat(nx=400, ny=400, cell=0.5, origin=(-100.0, -100.0))
        too_high = scan_profile(hf, down_scan_pose(z=SCANNER_RANGE_MM[1] + 1.0), span_mm=40.0)
        assert not too_high.valid.any()
        too_low = scan_profile(hf, down_scan_pose(z=SCANNER_RANGE_MM[0] - 1.0), span_mm=40.0)
        assert not too_low.valid.any()
        in_window = scan_profile(hf, down_scan_pose(z=300.0), span_mm=40.0)
        assert in_window.valid.all()

    def test_scan_line_outside_grid_raises(self):
        hf = make_flat(nx=100, ny=100, cell=0.5, origin=(-25.0, -25.0))
        with pytest.raises(StationOutsideGrid):
            scan_profile(hf, down_scan_pose(x=24.0), span_mm=40.0)

    def test_rejects_tilted_line_and_bad_args(self):
        hf = make_flat(nx=100, ny=100, cell=0.5, origin=(-25.0, -25.0))
        from crackfill import rotation_about_y

        tilted = RigidTransform(rotation_about_y(0.3), [0.0, 0.0, 310.0], Frame.LASER, Frame.ROBOT)
        with pytest.raises(ValueError):
            scan_profile(hf, tilted, span_mm=20.0)
        with pytest.raises(ValueError):
            scan_profile(hf, down_scan_pose(), span_mm=0.0)
        with pytest.raises(ValueError):
            scan_profile(hf, down_scan_pose(), span_mm=20.0, n_points=1)

    def test_profile_shape_validation(self):
        with pytest.raises(ValueError):
            LaserProfile(x=np.array([0.0, 1.0]), z=np.zeros(3), valid=np.ones(3, dtype=bool))
        with pytest.raises(ValueError):
            LaserProfile(x=np.array([1.0, 0.0]), z=np.zeros(2), valid=np.ones(2, dtype=bool))


class TestSensorNoise:
    def test_derive_is_deterministic_and_keyed(self):
        base = SensorNoise(seed=5)
        assert base.derive(2, 7).seed == SensorNoise(seed=5).derive(2, 7).seed
        assert base.derive(2, 7).seed != base.derive(2, 8).seed
        assert base.derive(2).seed != base.derive(3).seed

    def test_derive_keeps_noise_parameters(self):
        tf = RigidTransform(np.eye(3), [1.0, 0.0, 0.0])
        base = SensorNoise(depth_sigma_fraction=0.01, laser_sigma_mm=0.07, extrinsic_bias=tf, seed=5)
        child = base.derive(4)
        assert child.depth_sigma_fraction == 0.01
        assert child.laser_sigma_mm == 0.07
        assert child.extrinsic_bias is tf

    def test_generator_streams_are_independent(self):
        noise = SensorNoise(seed=0)
        a = noise.generator(0).normal(size=8)
        b = noise.generator(1).normal(size=8)
        a2 = noise.generator(0).normal(size=8)
        np.testing.assert_array_equal(a, a2)
        assert not np.array_equal(a, b)
