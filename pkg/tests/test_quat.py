import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quatsync.quat import (
    Quaternion,
    UnitQuaternion,
    is_rotation_matrix,
    rotation_distance,
)

ONE = Quaternion(1.0)
I = Quaternion(0.0, 1.0, 0.0, 0.0)
J = Quaternion(0.0, 0.0, 1.0, 0.0)
K = Quaternion(0.0, 0.0, 0.0, 1.0)

X_AXIS = np.array([1.0, 0.0, 0.0])
Y_AXIS = np.array([0.0, 1.0, 0.0])
Z_AXIS = np.array([0.0, 0.0, 1.0])


def assert_quat_close(p, q, tol=1e-12):
    assert np.linalg.norm(p.to_array() - q.to_array()) <= tol, (p, q)


def random_quat(rng, scale=1.0):
    return Quaternion.from_array(rng.normal(scale=scale, size=4))


def random_unit(rng):
    a = rng.normal(size=4)
    return UnitQuaternion.from_array(a / np.linalg.norm(a))


finite = st.floats(min_value=-100.0, max_value=100.0, allow_nan=False)
quats = st.builds(Quaternion, finite, finite, finite, finite)


class TestAlgebra:
    def test_defining_relations(self):
        assert_quat_close(I * J, K)
        assert_quat_close(J * I, -K)
        assert_quat_close(J * K, I)
        assert_quat_close(K * I, J)
        assert_quat_close(I * I, -ONE)
        assert_quat_close(J * J, -ONE)
        assert_quat_close(K * K, -ONE)
        assert_quat_close(I * J * K, -ONE)

    def test_identity_neutral(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            q = random_quat(rng)
            assert_quat_close(q * ONE, q)
            assert_quat_close(ONE * q, q)

    def test_hand_expanded_product(self):
        # (2 + i)(3 + j) = 6 + 2j + 3i + ij = 6 + 3i + 2j + k
        p = Quaternion(2.0, 1.0, 0.0, 0.0)
        q = Quaternion(3.0, 0.0, 1.0, 0.0)
        assert_quat_close(p * q, Quaternion(6.0, 3.0, 2.0, 1.0))

    def test_real_scalars_commute(self):
        rng = np.random.default_rng(1)
        q = random_quat(rng)
        assert_quat_close(2.5 * q, q * 2.5)

    def test_conjugate_examples(self):
        assert_quat_close(Quaternion(1, 1, 0, 0).conjugate(), Quaternion(1, -1, 0, 0))
        q = Quaternion(0.3, -1.2, 0.7, 2.0)
        assert_quat_close(q.conjugate().conjugate(), q)
        assert q.conjugate().norm() == q.norm()

    def test_q_times_conjugate_is_norm_squared(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            q = random_quat(rng)
            assert_quat_close(q * q.conjugate(), Quaternion(q.norm_squared()),
                              tol=1e-12 * max(1.0, q.norm_squared()))

    @given(quats, quats)
    @settings(max_examples=200, deadline=None)
    def test_norm_multiplicative(self, p, q):
        assert (p * q).norm() == pytest.approx(p.norm() * q.norm(),
                                               abs=1e-12 * max(1.0, p.norm() * q.norm()))

    @given(quats, quats)
    @settings(max_examples=200, deadline=None)
    def test_conjugate_antihomomorphism(self, p, q):
        lhs = (p * q).conjugate()
        rhs = q.conjugate() * p.conjugate()
        scale = max(1.0, p.norm() * q.norm())
        assert np.linalg.norm(lhs.to_array() - rhs.to_array()) <= 1e-14 * scale

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            Quaternion(math.nan)
        with pytest.raises(ValueError):
            Quaternion(1.0, math.inf, 0.0, 0.0)


class TestUnitQuaternion:
    def test_construction_tolerances(self):
        q = UnitQuaternion(1.0 + 1e-9, 0.0, 0.0, 0.0)  # renormalized silently
        assert abs(q.norm() - 1.0) <= 1e-12
        with pytest.raises(ValueError):
            UnitQuaternion(2.0, 0.0, 0.0, 0.0)  # far from unit: a logic error

    def test_inverse_is_conjugate(self):
        theta = 0.8
        q = UnitQuaternion(math.cos(theta / 2), 0.0, 0.0, math.sin(theta / 2))
        assert_quat_close(q.inverse(), UnitQuaternion(math.cos(theta / 2), 0.0, 0.0,
                                                      -math.sin(theta / 2)))
        rng = np.random.default_rng(3)
        for _ in range(20):
            q = random_unit(rng)
            assert_quat_close(q * q.inverse(), ONE, tol=1e-14)

    def test_from_axis_angle_examples(self):
        assert_quat_close(UnitQuaternion.from_axis_angle(Z_AXIS, 0.0), ONE)
        assert_quat_close(UnitQuaternion.from_axis_angle(Z_AXIS, math.pi), K)
        s = math.sqrt(2) / 2
        assert_quat_close(UnitQuaternion.from_axis_angle(X_AXIS, math.pi / 2),
                          Quaternion(s, s, 0.0, 0.0))

    def test_from_axis_angle_rejects_non_unit_axis(self):
        with pytest.raises(ValueError):
            UnitQuaternion.from_axis_angle(np.array([0.0, 0.0, 2.0]), 0.5)

    def test_canonical_examples(self):
        assert_quat_close(UnitQuaternion(-1.0, 0, 0, 0).canonical(), ONE)
        assert_quat_close(UnitQuaternion(0.0, 0, 0, -1.0).canonical(),
                          UnitQuaternion(0.0, 0, 0, 1.0))
        rng = np.random.default_rng(4)
        for _ in range(50):
            q = random_unit(rng)
            c = q.canonical()
            assert c.w > 0.0 or (c.w == 0.0 and (c.x, c.y, c.z) > (0.0, 0.0, 0.0))
            assert_quat_close(c.canonical(), c)  # idempotent
            np.testing.assert_allclose(c.rotation_matrix(), q.rotation_matrix(),
                                       atol=1e-15)


class TestRotationCorrespondence:
    def test_identity_matrix(self):
        np.testing.assert_allclose(UnitQuaternion.identity().rotation_matrix(),
                                   np.eye(3))

    def test_quarter_turn_about_z(self):
        r = UnitQuaternion.from_axis_angle(Z_AXIS, math.pi / 2).rotation_matrix()
        np.testing.assert_allclose(r, np.array([[0.0, -1.0, 0.0],
                                                [1.0, 0.0, 0.0],
                                                [0.0, 0.0, 1.0]]), atol=1e-15)

    def test_matrices_are_rotations(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            assert is_rotation_matrix(random_unit(rng).rotation_matrix())

    def test_homomorphism_against_matrix_product(self):
        rng = np.random.default_rng(6)
        for _ in range(1000):
            p, q = random_unit(rng), random_unit(rng)
            lhs = (p * q).rotation_matrix()
            rhs = p.rotation_matrix() @ q.rotation_matrix()
            assert np.abs(lhs - rhs).max() <= 1e-12

    def test_conjugate_transposes(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            q = random_unit(rng)
            np.testing.assert_allclose(q.conjugate().rotation_matrix(),
                                       q.rotation_matrix().T, atol=1e-15)

    def test_double_cover(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            q = random_unit(rng)
            np.testing.assert_array_equal((-q).rotation_matrix(),
                                          q.rotation_matrix())

    def test_rotate_examples(self):
        v = np.array([0.3, -0.4, 1.2])
        np.testing.assert_allclose(UnitQuaternion.identity().rotate(v), v)
        q = UnitQuaternion.from_axis_angle(Z_AXIS, math.pi / 2)
        np.testing.assert_allclose(q.rotate(X_AXIS), Y_AXIS, atol=1e-15)

    def test_rotate_matches_matrix_path(self):
        rng = np.random.default_rng(9)
        for _ in range(500):
            q = random_unit(rng)
            v = rng.normal(size=3)
            assert np.abs(q.rotate(v) - q.rotation_matrix() @ v).max() <= 1e-12

    def test_axis_angle_round_trip(self):
        rng = np.random.default_rng(10)
        for _ in range(50):
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            angle = rng.uniform(0.1, math.pi - 0.1)
            got_axis, got_angle = UnitQuaternion.from_axis_angle(axis, angle).axis_angle()
            # canonicalization may flip both axis and angle direction together
            if np.dot(got_axis, axis) < 0:
                got_axis, got_angle = -got_axis, 2 * math.pi - got_angle
            np.testing.assert_allclose(got_axis, axis, atol=1e-9)
            assert got_angle == pytest.approx(angle, abs=1e-9)


class TestRotationDistance:
    def test_zero_for_same_quaternion(self):
        rng = np.random.default_rng(11)
        q = random_unit(rng)
        assert rotation_distance(q, q) == 0.0

    def test_zero_for_opposite_sign(self):
        rng = np.random.default_rng(12)
        q = random_unit(rng)
        assert rotation_distance(q, -q) == pytest.approx(0.0, abs=1e-12)

    def test_matches_spectral_norm_oracle(self):
        rng = np.random.default_rng(13)
        for _ in range(1000):
            p, q = random_unit(rng), random_unit(rng)
            oracle = np.linalg.norm(p.rotation_matrix() - q.rotation_matrix(), ord=2)
            assert rotation_distance(p, q) == pytest.approx(oracle, abs=1e-9)
