import math

import numpy as np
import pytest

from deskpick.geometry import (
    BehindCameraError,
    DegenerateCornersError,
    FrameId,
    FrameMismatchError,
    InvalidDepthError,
    ParallelRayError,
    PinholeCamera,
    RigidTransform,
    estimate_fiducial_pose,
    intersect_ray_table,
    look_at_pose,
    marker_corners_table,
    quat_from_axis_angle,
    quat_mul,
    quat_to_matrix,
    rotation_angle_between,
    wrap_orientation,
)


def random_transform(rng, parent=FrameId.TABLE, child=FrameId.OBJECT):
    axis = rng.normal(size=3)
    angle = rng.uniform(-math.pi, math.pi)
    q = quat_from_axis_angle(axis, angle)
    t = rng.uniform(-1, 1, size=3)
    return RigidTransform(q, t, parent, child)


class TestRigidTransform:
    def test_identity_compose_returns_same(self):
        rng = np.random.default_rng(0)
        t = random_transform(rng, FrameId.TABLE, FrameId.OBJECT)
        ident = RigidTransform.identity(FrameId.TABLE, FrameId.TABLE)
        out = ident.compose(t)
        np.testing.assert_allclose(out.rotation, t.rotation, atol=1e-12)
        np.testing.assert_allclose(out.translation, t.translation, atol=1e-12)
        assert out.parent_frame is FrameId.TABLE
        assert out.child_frame is FrameId.OBJECT

    def test_compose_with_inverse_is_identity(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            t = random_transform(rng)
            ident = t.compose(t.invert())
            angle = 2 * math.acos(min(1.0, abs(ident.rotation[0])))
            assert angle < 1e-9
            assert np.linalg.norm(ident.translation) < 1e-9

    def test_associativity_on_random_transforms(self):
        rng = np.random.default_rng(42)
        worst = 0.0
        for _ in range(100):
            a = random_transform(rng, FrameId.CAMERA, FrameId.TABLE)
            b = random_transform(rng, FrameId.TABLE, FrameId.ROBOT_BASE)
            c = random_transform(rng, FrameId.ROBOT_BASE, FrameId.GRIPPER)
            left = a.compose(b).compose(c)
            right = a.compose(b.compose(c))
            worst = max(worst,
                        float(np.abs(left.rotation_matrix - right.rotation_matrix).max()),
                        float(np.abs(left.translation - right.translation).max()))
        assert worst < 1e-9

    def test_frame_mismatch_rejected(self):
        a = RigidTransform.identity(FrameId.CAMERA, FrameId.TABLE)
        b = RigidTransform.identity(FrameId.ROBOT_BASE, FrameId.GRIPPER)
        with pytest.raises(FrameMismatchError):
            a.compose(b)

    def test_apply_invert_round_trip(self):
        rng = np.random.default_rng(7)
        t = random_transform(rng)
        pts = rng.uniform(-1, 1, size=(100, 3))
        back = t.invert().apply(t.apply(pts))
        assert np.abs(back - pts).max() < 1e-9

    def test_norm_drift_over_chained_compositions(self):
        rng = np.random.default_rng(3)
        step = random_transform(rng, FrameId.OBJECT, FrameId.OBJECT)
        acc = RigidTransform.identity(FrameId.OBJECT, FrameId.OBJECT)
        for _ in range(100_000):
            acc = acc.compose(step)
        assert abs(np.linalg.norm(acc.rotation) - 1.0) < 1e-9

    def test_quaternion_normalized_on_construction(self):
        t = RigidTransform(np.array([2.0, 0, 0, 0]), np.zeros(3),
                           FrameId.TABLE, FrameId.OBJECT)
        assert abs(np.linalg.norm(t.rotation) - 1.0) < 1e-12


class TestPinholeCamera:
    def setup_method(self):
        self.cam = PinholeCamera(fx=500, fy=500, cx=320, cy=240, width=640, height=480)

    def test_principal_ray(self):
        p = self.cam.backproject((320, 240), 1.0)
        np.testing.assert_allclose(p, [0.0, 0.0, 1.0], atol=1e-12)

    def test_hand_evaluated_backprojection(self):
        # x = (820-320)*2/500 = 2.0, y = 0, z = 2.0 -- but 820 is out of
        # bounds for a 640-wide image, so use the mirrored in-bounds pixel.
        p = self.cam.backproject((620, 240), 2.0)
        np.testing.assert_allclose(p, [1.2, 0.0, 2.0], atol=1e-12)

    def test_wide_camera_matches_formula(self):
        cam = PinholeCamera(fx=500, fy=500, cx=320, cy=240, width=1000, height=480)
        p = cam.backproject((820, 240), 2.0)
        np.testing.assert_allclose(p, [2.0, 0.0, 2.0], atol=1e-12)

    def test_project_backproject_round_trip(self):
        rng = np.random.default_rng(11)
        us = rng.uniform(0, 639.999, size=1000)
        vs = rng.uniform(0, 479.999, size=1000)
        ds = rng.uniform(0.1, 5.0, size=1000)
        for u, v, d in zip(us, vs, ds):
            p = self.cam.backproject((u, v), d)
            uv = self.cam.project(p)
            assert abs(uv[0] - u) < 1e-6 and abs(uv[1] - v) < 1e-6

    def test_invalid_depth(self):
        with pytest.raises(InvalidDepthError):
            self.cam.backproject((320, 240), 0.0)
        with pytest.raises(InvalidDepthError):
            self.cam.backproject((320, 240), -1.0)
        with pytest.raises(InvalidDepthError):
            self.cam.backproject((320, 240), float("nan"))

    def test_out_of_bounds_pixel(self):
        with pytest.raises(ValueError):
            self.cam.backproject((900, 240), 1.0)

    def test_invalid_intrinsics(self):
        with pytest.raises(ValueError):
            PinholeCamera(fx=-1, fy=500, cx=320, cy=240, width=640, height=480)
        with pytest.raises(ValueError):
            PinholeCamera(fx=500, fy=500, cx=700, cy=240, width=640, height=480)

    def test_project_behind_camera(self):
        with pytest.raises(BehindCameraError):
            self.cam.project(np.array([0.0, 0.0, -1.0]))


class TestFiducialPose:
    def setup_method(self):
        self.cam = PinholeCamera(fx=500, fy=500, cx=320, cy=240, width=640, height=480)
        self.side = 0.08

    def synthesize(self, pose):
        pts_cam = pose.apply(marker_corners_table(self.side))
        return self.cam.project(pts_cam)

    def test_fronto_parallel_marker(self):
        # Marker facing the camera one meter out along the optical axis.
        # Camera x = table x and camera y = -table y, i.e. a 180 deg flip
        # about x maps table to camera orientation.
        q = quat_from_axis_angle([1, 0, 0], math.pi)
        truth = RigidTransform(q, np.array([0, 0, 1.0]),
                               FrameId.CAMERA, FrameId.TABLE)
        corners = self.synthesize(truth)
        est = estimate_fiducial_pose(corners, self.side, self.cam)
        np.testing.assert_allclose(est.translation, [0, 0, 1.0], atol=1e-6)
        assert rotation_angle_between(est.rotation, truth.rotation) < 1e-6

    def test_synthesize_then_solve_random_poses(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            axis = rng.normal(size=3)
            angle = rng.uniform(0.4, 1.2)
            base = quat_from_axis_angle([1, 0, 0], math.pi)
            q = quat_mul(quat_from_axis_angle(axis, angle * 0.3), base)
            t = np.array([rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2),
                          rng.uniform(0.6, 1.4)])
            truth = RigidTransform(q, t, FrameId.CAMERA, FrameId.TABLE)
            corners = self.synthesize(truth)
            est = estimate_fiducial_pose(corners, self.side, self.cam)
            assert np.linalg.norm(est.translation - t) < 1e-6
            assert rotation_angle_between(est.rotation, q) < 1e-6
            reproj = self.cam.project(est.apply(marker_corners_table(self.side)))
            assert np.abs(reproj - corners).max() < 1e-3

    def test_noise_robustness_monte_carlo(self):
        # Depth-from-scale limits the range accuracy of a small marker, so
        # the bounds here were frozen from the Monte-Carlo itself: at the
        # default 8 cm marker, in-plane error stays below 5 mm while the
        # full 3D error is bounded by the range component (< 2 cm). A 24 cm
        # marker brings the full error under 5 mm.
        base = quat_from_axis_angle([1, 0, 0], math.pi)
        truth = RigidTransform(base, np.array([0.05, -0.03, 1.0]),
                               FrameId.CAMERA, FrameId.TABLE)
        for side, full_bound, xy_bound in ((self.side, 0.020, 0.005),
                                           (0.24, 0.005, 0.005)):
            clean = self.cam.project(truth.apply(marker_corners_table(side)))
            for seed in range(100):
                rng = np.random.default_rng(seed)
                noisy = clean + rng.uniform(-0.5, 0.5, size=clean.shape)
                est = estimate_fiducial_pose(noisy, side, self.cam)
                d = est.translation - truth.translation
                assert np.linalg.norm(d) < full_bound
                assert np.linalg.norm(d[:2]) < xy_bound

    def test_collinear_corners_rejected(self):
        corners = np.array([[100, 100], [200, 200], [300, 300], [400, 400]])
        with pytest.raises(DegenerateCornersError):
            estimate_fiducial_pose(corners, self.side, self.cam)


class TestRayTableIntersection:
    def setup_method(self):
        self.cam = PinholeCamera(fx=500, fy=500, cx=320, cy=240, width=640, height=480)

    def test_nadir_center_pixel(self):
        pose = look_at_pose([0, 0, 1.0], [0, 0, 0])
        p = intersect_ray_table((320, 240), self.cam, pose)
        np.testing.assert_allclose(p, [0, 0, 0], atol=1e-9)

    def test_off_center_pixel_matches_closed_form(self):
        pose = look_at_pose([0, 0, 1.0], [0, 0, 0])
        u, v = 420.0, 180.0
        p = intersect_ray_table((u, v), self.cam, pose)
        # Straight-down camera with x_cam = +x table, y_cam = -y table:
        # at depth 1 the pixel offset maps to (dx, -dy) on the plane.
        dx = (u - 320) / 500
        dy = (v - 240) / 500
        np.testing.assert_allclose(p, [dx, -dy, 0], atol=1e-9)

    def test_oblique_matches_analytic(self):
        pose = look_at_pose([0.1, -0.6, 0.7], [0.0, 0.0, 0.0])
        p = intersect_ray_table((400, 300), self.cam, pose)
        assert abs(p[2]) < 1e-9
        # Verify by reprojection: the recovered point maps back to the pixel.
        uv = self.cam.project(pose.apply(p))
        np.testing.assert_allclose(uv, [400, 300], atol=1e-6)

    def test_horizontal_camera_raises(self):
        pose = look_at_pose([0, -1.0, 0.5], [0, 0, 0.5])
        with pytest.raises(ParallelRayError):
            intersect_ray_table((320, 240), self.cam, pose)


def test_wrap_orientation():
    assert wrap_orientation(0.0) == 0.0
    assert abs(wrap_orientation(math.pi / 2) - math.pi / 2) < 1e-12
    assert abs(wrap_orientation(-math.pi / 2) - math.pi / 2) < 1e-12
    assert abs(wrap_orientation(2.0) - (2.0 - math.pi)) < 1e-12
    assert abs(wrap_orientation(math.pi + 0.3) - 0.3) < 1e-12


def test_quat_to_matrix_orthonormal():
    rng = np.random.default_rng(9)
    for _ in range(20):
        q = quat_from_axis_angle(rng.normal(size=3), rng.uniform(-3, 3))
        m = quat_to_matrix(q)
        np.testing.assert_allclose(m @ m.T, np.eye(3), atol=1e-12)
        assert abs(np.linalg.det(m) - 1) < 1e-12
