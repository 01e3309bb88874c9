import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from neuroslam.geometry import (CameraIntrinsics, InvalidDepthError, InvalidIntervalError,
                                PlanarVelocity, RigidTransform3, back_project,
                                planar_pose_to_transform, project, relative_transform, rot_y,
                                so3_log, transform_to_planar_pose, velocity_from_relative,
                                wrap_2pi, wrap_pi)
from oracles import planar_velocity_oracle

finite = st.floats(-10, 10, allow_nan=False)
twist = st.lists(st.floats(-1, 1), min_size=6, max_size=6).map(np.array)
transforms = twist.map(RigidTransform3.exp)


@pytest.fixture
def k():
    return CameraIntrinsics(100.0, 100.0, 50.0, 50.0, 0.5, 101, 101)


class TestProjection:
    def test_optical_axis(self, k):
        assert np.allclose(project(k, (0, 0, 1)), (50, 50))

    def test_off_axis(self, k):
        assert np.allclose(project(k, (1, 0, 2)), (100, 50))

    def test_hand_evaluated(self, k):
        assert np.allclose(project(k, (0.3, -0.2, 4)), (57.5, 45.0), atol=1e-12)

    @pytest.mark.parametrize("z", [0.0, -1.0])
    def test_non_positive_depth_rejected(self, k, z):
        assert project(k, (0.1, 0.1, z)) is None

    def test_back_project_examples(self, k):
        assert np.allclose(back_project(k, (50, 50), 1.0), (0, 0, 1))
        assert np.allclose(back_project(k, (100, 50), 0.5), (1, 0, 2))

    @pytest.mark.parametrize("d", [0.0, -0.3])
    def test_back_project_invalid_depth(self, k, d):
        with pytest.raises(InvalidDepthError):
            back_project(k, (10, 10), d)

    @given(st.floats(0, 100), st.floats(0, 100), st.floats(1e-3, 10))
    def test_round_trip(self, u, v, d):
        k = CameraIntrinsics(100.0, 100.0, 50.0, 50.0, 0.5, 101, 101)
        assert np.allclose(project(k, back_project(k, (u, v), d)), (u, v), atol=1e-9)

    def test_intrinsics_invariants(self):
        with pytest.raises(ValueError):
            CameraIntrinsics(0.0, 1.0, 1.0, 1.0, 0.5, 10, 10)
        with pytest.raises(ValueError):
            CameraIntrinsics(1.0, 1.0, 10.0, 1.0, 0.5, 10, 10)


class TestRigidTransform:
    @given(transforms)
    def test_exp_is_valid(self, t):
        assert t.is_valid()

    @given(twist)
    def test_exp_log_round_trip(self, xi):
        assert np.allclose(RigidTransform3.exp(xi).log(), xi, atol=1e-9)

    @given(transforms, transforms)
    def test_relative_composes_to_identity(self, ti, tj):
        tji = relative_transform(ti, tj)
        m = (tji @ (ti.inverse() @ tj)).matrix()
        assert tji.is_valid()
        assert np.allclose(m, np.eye(4), atol=1e-9)

    @given(transforms)
    def test_relative_to_self_is_identity(self, t):
        assert np.allclose(relative_transform(t, t).matrix(), np.eye(4), atol=1e-9)

    @given(transforms)
    def test_relative_to_identity(self, t):
        assert np.allclose(relative_transform(t, RigidTransform3.identity()).matrix(),
                           t.matrix(), atol=1e-12)

    def test_so3_log_near_pi(self):
        w = np.array([0.0, math.pi - 1e-9, 0.0])
        assert np.allclose(so3_log(RigidTransform3.exp(np.r_[0, 0, 0, w]).rotation), w,
                           atol=1e-6)

    def test_reorthonormalized(self):
        R = rot_y(0.3) + 1e-4
        t = RigidTransform3(R, np.zeros(3)).reorthonormalized()
        assert t.is_valid()


class TestVelocity:
    def test_forward(self):
        v = velocity_from_relative(RigidTransform3(np.eye(3), [0, 0, 1]), 0.1)
        assert (v.rotational, v.translational) == (0.0, pytest.approx(10.0))

    @pytest.mark.parametrize("dt", [0.01, 1.0, 7.0])
    def test_identity(self, dt):
        v = velocity_from_relative(RigidTransform3.identity(), dt)
        assert (v.rotational, v.translational) == (0.0, 0.0)

    def test_yaw_sign_oracle(self):
        v = velocity_from_relative(RigidTransform3(rot_y(0.1), np.zeros(3)), 0.1)
        assert v.rotational == pytest.approx(-1.0, rel=1e-12)

    @pytest.mark.parametrize("dt", [0.0, -0.1])
    def test_invalid_interval(self, dt):
        with pytest.raises(InvalidIntervalError):
            velocity_from_relative(RigidTransform3.identity(), dt)
        with pytest.raises(InvalidIntervalError):
            PlanarVelocity(0.0, 0.0, dt)

    @given(twist, st.floats(-5, 5))
    def test_vertical_translation_invariance(self, xi, dy):
        t = RigidTransform3.exp(xi)
        shifted = RigidTransform3(t.rotation, t.translation + [0, dy, 0])
        a, b = velocity_from_relative(t, 0.1), velocity_from_relative(shifted, 0.1)
        assert a.rotational == b.rotational
        assert a.translational == pytest.approx(b.translational, abs=1e-12)

    @given(st.floats(-0.05, 0.05), st.integers(1, 20))
    def test_composed_small_rotations(self, alpha, n):
        step = RigidTransform3(rot_y(alpha), np.zeros(3))
        total = RigidTransform3.identity()
        for _ in range(n):
            total = total @ step
        one = velocity_from_relative(step, 0.1).rotational
        many = velocity_from_relative(total, 0.1 * n).rotational
        assert many == pytest.approx(one, abs=1e-6)

    @given(st.floats(-1.5, 1.5), st.floats(-3, 3), st.floats(-3, 3), st.floats(-math.pi, math.pi),
           st.floats(0.01, 2))
    def test_planar_motion_oracle(self, dth, dx, dy, th0, dt):
        a = planar_pose_to_transform(1.0, -2.0, th0)
        b = planar_pose_to_transform(1.0 + dx, -2.0 + dy, th0 + dth)
        v = velocity_from_relative(relative_transform(a, b), dt)
        w_ref, v_ref = planar_velocity_oracle(dth, dx, dy, dt)
        assert v.rotational == pytest.approx(w_ref, rel=1e-9, abs=1e-12)
        assert v.translational == pytest.approx(v_ref, rel=1e-9, abs=1e-12)


class TestPlanar:
    @given(finite, finite, st.floats(-math.pi, math.pi - 1e-9))
    def test_round_trip(self, x, y, th):
        out = transform_to_planar_pose(planar_pose_to_transform(x, y, th))
        assert np.allclose(out[:2], (x, y))
        assert abs(wrap_pi(out[2] - th)) < 1e-9

    @given(st.floats(-100, 100))
    def test_wrap_ranges(self, a):
        assert -math.pi <= wrap_pi(a) < math.pi
        assert 0 <= wrap_2pi(a) < 2 * math.pi
