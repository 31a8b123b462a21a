import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from app.lie.core import (
    adjoint_conjugate,
    adjoint_matrix,
    algebra_basis,
    algebra_dimension,
    algebra_from_coordinates,
    algebra_to_coordinates,
    check_membership,
    compose,
    hat,
    identity_deviation,
    inverse,
    project_to_group,
    vee,
)
from app.lie.exp_log import exp_closed_so3
from app.lie.membership import in_algebra
from app.models.errors import (
    ConditioningError,
    FrameCompositionError,
    InvalidInputError,
    NoCanonicalCoordinatesError,
    NotARigidTransformError,
    NotARotationError,
    NotInAlgebraError,
)
from app.models.groups import AlgebraElement, GroupElement, Twist
from app.models.tags import SE3, SO3, GroupFamily, GroupTag
from conftest import ALL_TAGS, GL4, SU4

coordinate = st.floats(min_value=-10, max_value=10, allow_nan=False, allow_infinity=False)


def rot_z(theta):
    return exp_closed_so3([0.0, 0.0, theta])


class TestCompose:
    def test_inverse_pair_gives_identity(self, random_element):
        for tag in ALL_TAGS:
            g = random_element(tag, frames=("S", "T"))
            product = compose(g, inverse(g))
            assert product.frames == ("S", "S")
            assert_allclose(product.matrix, np.eye(tag.dim), atol=1e-12)

    def test_identity_is_neutral(self, random_element):
        g = random_element(SE3, frames=("S", "T"))
        assert_array_equal(compose(GroupElement.identity(SE3), g).matrix, g.matrix)

    def test_matches_dense_product(self, random_element):
        a = random_element(SE3, frames=("A", "B"))
        b = random_element(SE3, frames=("B", "C"))
        ab = compose(a, b)
        assert ab.frames == ("A", "C")
        assert_array_equal(ab.matrix, a.matrix @ b.matrix)

    def test_frame_mismatch_raises(self, random_element):
        a = random_element(SE3, frames=("A", "B"))
        c = random_element(SE3, frames=("C", "D"))
        with pytest.raises(FrameCompositionError):
            compose(a, c)
        assert compose(a, c, check_frames=False).frames == ("A", "D")

    def test_frame_check_can_be_disabled_globally(self, monkeypatch, random_element):
        from app.config import get_settings

        monkeypatch.setenv("LIETRACK_CHECK_FRAMES", "false")
        get_settings.cache_clear()
        a = random_element(SO3, frames=("A", "B"))
        assert compose(a, a).frames == ("A", "B")

    def test_tag_mismatch_raises(self):
        with pytest.raises(FrameCompositionError):
            compose(GroupElement.identity(SO3), GroupElement.identity(SU4))

    def test_closure(self, random_element):
        for tag in ALL_TAGS:
            for _ in range(1000):
                g = compose(random_element(tag), random_element(tag))
                assert check_membership(g.matrix, tag, 1e-9)


class TestInverse:
    def test_identity(self):
        assert_array_equal(inverse(GroupElement.identity(SE3)).matrix, np.eye(4))

    def test_rotation_about_z(self):
        assert_allclose(inverse(rot_z(0.7)).matrix, rot_z(-0.7).matrix, atol=1e-15)

    def test_frames_swap(self, random_element):
        assert inverse(random_element(SE3, frames=("S", "T"))).frames == ("T", "S")

    def test_general_linear_residual(self, random_element):
        g = random_element(GL4)
        assert np.linalg.norm(g.matrix @ inverse(g).matrix - np.eye(4)) <= 1e-10

    def test_involution(self, random_element):
        for tag in (SE3, SU4, GL4):
            g = random_element(tag)
            assert_allclose(inverse(inverse(g)).matrix, g.matrix, atol=1e-12, rtol=0)

    def test_ill_conditioned_general_linear(self):
        g = GroupElement(np.diag([1.0, 1.0, 1.0, 1e-13]), GL4, validate=False)
        with pytest.raises(ConditioningError):
            inverse(g)


class TestAdjointConjugate:
    def test_identity_leaves_element(self, random_algebra):
        X = random_algebra(SE3)
        assert_array_equal(adjoint_conjugate(GroupElement.identity(SE3), X).matrix, X.matrix)

    def test_zero_stays_zero(self, random_element):
        g = random_element(SU4)
        assert_array_equal(adjoint_conjugate(g, AlgebraElement.zero(SU4)).matrix, np.zeros((4, 4)))

    def test_rotates_axis(self):
        X = hat(SO3, Twist.so3([1.0, 0.0, 0.0]))
        moved = adjoint_conjugate(rot_z(np.pi / 2), X)
        assert_allclose(vee(SO3, moved).vector, [0.0, 1.0, 0.0], atol=1e-15)

    def test_frames(self, random_element, random_algebra):
        g = random_element(SE3, frames=("T", "D"))
        assert adjoint_conjugate(g, random_algebra(SE3, frame="D")).frame == "T"
        with pytest.raises(FrameCompositionError):
            adjoint_conjugate(g, random_algebra(SE3, frame="T"))

    def test_preserves_algebra(self, random_element, random_algebra):
        for tag in ALL_TAGS:
            result = adjoint_conjugate(random_element(tag), random_algebra(tag))
            assert in_algebra(result.matrix, tag, 1e-9)


class TestHatVee:
    def test_so3_layout(self):
        assert_array_equal(
            hat(SO3, Twist.so3([0, 0, 1])).matrix,
            [[0, -1, 0], [1, 0, 0], [0, 0, 0]],
        )

    def test_zero(self):
        assert_array_equal(hat(SO3, Twist.so3([0, 0, 0])).matrix, np.zeros((3, 3)))
        assert_array_equal(vee(SE3, AlgebraElement.zero(SE3)).vector, np.zeros(6))

    def test_se3_translation_column(self):
        m = hat(SE3, Twist.se3([1, 2, 3], [0, 0, 0])).matrix
        expected = np.zeros((4, 4))
        expected[:3, 3] = [1, 2, 3]
        assert_array_equal(m, expected)

    def test_vee_reads_display_matrix(self):
        wx, wy, wz = 0.3, -1.2, 2.5
        m = np.array([[0, -wz, wy], [wz, 0, -wx], [-wy, wx, 0]])
        assert_array_equal(vee(SO3, AlgebraElement(m, SO3)).vector, [wx, wy, wz])

    @given(st.lists(coordinate, min_size=6, max_size=6))
    def test_se3_roundtrip_is_exact(self, values):
        x = Twist(values)
        assert_array_equal(vee(SE3, hat(SE3, x)).vector, x.vector)

    @given(st.lists(coordinate, min_size=3, max_size=3))
    def test_so3_roundtrip_is_exact(self, values):
        X = hat(SO3, Twist(values))
        assert_array_equal(hat(SO3, vee(SO3, X)).matrix, X.matrix)

    def test_unsupported_group(self):
        with pytest.raises(NoCanonicalCoordinatesError):
            hat(SU4, Twist.so3([1, 2, 3]))
        with pytest.raises(NoCanonicalCoordinatesError):
            vee(GroupTag(GroupFamily.SO, 4), AlgebraElement.zero(GroupTag(GroupFamily.SO, 4)))

    def test_asymmetric_input_rejected(self):
        m = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
        with pytest.raises(NotInAlgebraError):
            vee(SO3, AlgebraElement(m, SO3, validate=False))

    def test_wrong_twist_length(self):
        with pytest.raises(InvalidInputError):
            hat(SE3, Twist.so3([1, 2, 3]))


class TestMembership:
    def test_identity_everywhere(self):
        for tag in ALL_TAGS:
            assert check_membership(np.eye(tag.dim), tag, 1e-9)

    def test_reflection_is_not_a_rotation(self):
        assert not check_membership(np.diag([1.0, 1.0, -1.0]), SO3, 1e-9)

    def test_exp_of_traceless_skew_hermitian(self, random_element):
        assert check_membership(random_element(SU4).matrix, SU4, 1e-9)

    def test_general_linear_needs_positive_determinant(self):
        assert not check_membership(np.diag([-1.0, 1.0, 1.0, 1.0]), GL4, 1e-9)
        assert check_membership(np.diag([2.0, 1.0, 0.5, 3.0]), GL4, 1e-9)

    def test_wrong_shape(self):
        assert not check_membership(np.eye(3), SE3, 1e-9)

    def test_constructor_rejects_non_members(self):
        with pytest.raises(NotARotationError):
            GroupElement(np.diag([1.0, 1.0, -1.0]), SO3)
        bad = np.eye(4)
        bad[3, 0] = 0.5
        with pytest.raises(NotARigidTransformError):
            GroupElement(bad, SE3)
        with pytest.raises(InvalidInputError):
            GroupElement(np.eye(3) + 1e-3j, SO3)

    def test_matrix_is_read_only(self):
        g = GroupElement.identity(SO3)
        with pytest.raises(ValueError):
            g.matrix[0, 0] = 2.0

    def test_real_groups_store_real_matrices(self, random_element):
        assert random_element(SE3).matrix.dtype == np.float64
        assert random_element(SU4).matrix.dtype == np.complex128


class TestIdentityDeviation:
    def test_identity(self):
        assert identity_deviation(GroupElement.identity(SE3)) == (0.0, 0.0)

    def test_half_turn(self):
        _, spectral = identity_deviation(rot_z(np.pi))
        assert spectral == pytest.approx(2.0, abs=1e-12)

    def test_scalar_matrix(self):
        frobenius, spectral = identity_deviation(GroupElement(2.0 * np.eye(4), GL4))
        assert frobenius == pytest.approx(2.0)
        assert spectral == pytest.approx(1.0)


class TestAlgebraCoordinates:
    def test_dimensions(self):
        expected = {SO3: 3, SE3: 6, SU4: 15, GL4: 16}
        for tag, dim in expected.items():
            assert algebra_dimension(tag) == dim
            basis = algebra_basis(tag)
            assert len(basis) == dim
            for b in basis:
                assert in_algebra(b, tag, 1e-15)

    def test_basis_is_independent(self):
        for tag in ALL_TAGS:
            basis = np.stack(algebra_basis(tag)).reshape(algebra_dimension(tag), -1)
            stacked = np.hstack([basis.real, basis.imag])
            assert np.linalg.matrix_rank(stacked) == algebra_dimension(tag)

    def test_coordinates_roundtrip(self, rng):
        for tag in ALL_TAGS:
            coords = rng.normal(size=algebra_dimension(tag))
            X = algebra_from_coordinates(tag, coords)
            assert_allclose(algebra_to_coordinates(tag, X), coords, atol=1e-12)

    def test_canonical_groups_follow_hat(self):
        coords = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6]
        assert_array_equal(algebra_from_coordinates(SE3, coords).matrix, hat(SE3, Twist(coords)).matrix)

    def test_wrong_length(self):
        with pytest.raises(InvalidInputError):
            algebra_from_coordinates(SU4, [1.0, 2.0])


class TestAlgebraArithmetic:
    def test_frames_must_match(self, random_algebra):
        with pytest.raises(FrameCompositionError):
            random_algebra(SE3, frame="T") + random_algebra(SE3, frame="D")

    def test_scaling(self, random_algebra):
        X = random_algebra(SU4)
        assert_allclose((2.0 * X).matrix, 2.0 * X.matrix)
        assert_allclose((X / 4).matrix, X.matrix / 4)
        assert_allclose((X - X).matrix, 0.0)

    def test_real_algebra_rejects_complex_scale(self, random_algebra):
        with pytest.raises(InvalidInputError):
            random_algebra(SO3) * 1j


class TestProjection:
    def test_rotation_drift_is_removed(self, rng):
        R = rot_z(0.4).matrix + 1e-7 * rng.normal(size=(3, 3))
        projected = project_to_group(GroupElement(R, SO3, validate=False))
        assert check_membership(projected.matrix, SO3, 1e-12)
        assert_allclose(projected.matrix, rot_z(0.4).matrix, atol=1e-6)

    def test_unitary_drift_is_removed(self, rng, random_element):
        U = random_element(SU4).matrix
        drifted = U + 1e-8 * (rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
        projected = project_to_group(GroupElement(drifted, SU4, validate=False))
        assert check_membership(projected.matrix, SU4, 1e-12)
        assert_allclose(projected.matrix, U, atol=1e-7)

    def test_rigid_translation_untouched(self, rng, random_element):
        g = random_element(SE3).matrix.copy()
        g[:3, :3] += 1e-8 * rng.normal(size=(3, 3))
        projected = project_to_group(GroupElement(g, SE3, validate=False))
        assert check_membership(projected.matrix, SE3, 1e-12)
        assert_array_equal(projected.matrix[:3, 3], g[:3, 3])


def test_adjoint_matrix_acts_on_twists(rng, random_element):
    g = random_element(SE3)
    xi = rng.normal(size=6)
    expected = vee(SE3, adjoint_conjugate(g, hat(SE3, Twist(xi)))).vector
    assert_allclose(adjoint_matrix(g) @ xi, expected, atol=1e-12)
