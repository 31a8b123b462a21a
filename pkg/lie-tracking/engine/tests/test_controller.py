import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from pydantic import ValidationError

from app.lie.core import compose, hat, identity_deviation, inverse, vee
from app.lie.exp_log import exp, exp_closed_se3, exp_closed_so3
from app.models.errors import BranchDomainError, FrameCompositionError, InvalidInputError
from app.models.groups import AlgebraElement, GroupElement, Twist
from app.models.records import ControllerConfig
from app.models.tags import SE3, SO3
from app.services.controller_service import (
    DecayMode,
    TrackingController,
    closed_loop_error_velocity,
    control_law,
    control_terms,
    predicted_error_decay,
    reference_body_velocity_discrete,
    tracking_error,
)
from app.utils.trajectory_generator import make_offset_initial_state, make_reference, rollout
from conftest import SU4

HELIX = [0.5, 0.5, 0.3, 0.5, 0.3, 0.7]


class TestControllerConfig:
    def test_defaults(self):
        cfg = ControllerConfig()
        assert cfg.k == 1.0
        assert cfg.dt == 0.01

    @pytest.mark.parametrize("k, dt", [(0.0, 0.01), (-1.0, 0.01), (1.0, 0.0), (200.0, 0.01), (1.0, 2.0)])
    def test_rejects_unstable_or_invalid(self, k, dt):
        with pytest.raises(ValidationError):
            ControllerConfig(k=k, dt=dt)

    def test_is_frozen(self):
        with pytest.raises(ValidationError):
            ControllerConfig().k = 3.0


class TestTrackingError:
    def test_perfect_tracking(self):
        err = tracking_error(GroupElement.identity(SE3, ("S", "T")), GroupElement.identity(SE3, ("S", "D")))
        assert_array_equal(err.g_TD.matrix, np.eye(4))
        assert_array_equal(err.xi_TD.matrix, np.zeros((4, 4)))
        assert err.in_local_region
        assert err.g_TD.frames == ("T", "D")
        assert err.xi_TD.frame == "T"

    def test_recovers_small_offset(self, random_element, random_algebra):
        for tag in (SE3, SU4):
            g_ST = random_element(tag, frames=("S", "T"))
            xi = random_algebra(tag, scale=0.2, frame="T")
            g_SD = compose(g_ST, exp(xi)).relabel(("S", "D"))
            assert_allclose(tracking_error(g_ST, g_SD).xi_TD.matrix, xi.matrix, atol=1e-12)

    def test_far_offset_is_flagged_but_valid(self):
        g_SD = exp_closed_se3(np.array([1.0, 0.0, 0.0, 0.0, 0.0, 2.5])).relabel(("S", "D"))
        err = tracking_error(GroupElement.identity(SE3, ("S", "T")), g_SD)
        assert not err.in_local_region
        assert err.spectral_radius > 1.0
        assert_allclose(exp(err.xi_TD).matrix, err.g_TD.matrix, atol=1e-9)

    def test_exp_of_error_reconstructs_configuration(self, random_element):
        for _ in range(50):
            err = tracking_error(random_element(SE3, frames=("S", "T")), random_element(SE3, frames=("S", "D")))
            assert_allclose(exp(err.xi_TD).matrix, err.g_TD.matrix, atol=1e-9)

    def test_base_frames_must_agree(self):
        with pytest.raises(FrameCompositionError):
            tracking_error(GroupElement.identity(SE3, ("S", "T")), GroupElement.identity(SE3, ("W", "D")))


class TestControlLaw:
    def test_pure_feedforward_at_zero_error(self, random_algebra):
        err = tracking_error(GroupElement.identity(SE3, ("S", "T")), GroupElement.identity(SE3, ("S", "D")))
        Vb = random_algebra(SE3, frame="D")
        u = control_law(err, Vb, ControllerConfig(k=3.0))
        assert_array_equal(u.matrix, Vb.matrix)
        assert u.frame == "T"

    def test_pure_feedback_without_reference_motion(self, random_element):
        cfg = ControllerConfig(k=2.0)
        err = tracking_error(random_element(SU4, frames=("S", "T")), random_element(SU4, frames=("S", "D")))
        u = control_law(err, AlgebraElement.zero(SU4, "D"), cfg)
        assert_allclose(u.matrix, 2.0 * err.xi_TD.matrix, atol=1e-15)

    def test_gain_scaling(self, random_element, random_algebra):
        err = tracking_error(random_element(SE3, frames=("S", "T")), random_element(SE3, frames=("S", "D")))
        Vb = random_algebra(SE3, frame="D")
        fb1, ff1 = control_terms(err, Vb, ControllerConfig(k=1.0))
        fb2, ff2 = control_terms(err, Vb, ControllerConfig(k=2.0))
        assert_array_equal(fb2.matrix, 2.0 * fb1.matrix)
        assert_array_equal(ff2.matrix, ff1.matrix)

    @pytest.mark.parametrize("tag", [SE3, SU4])
    def test_closed_loop_error_velocity_is_pure_feedback(self, tag, random_element, random_algebra):
        cfg = ControllerConfig(k=1.5)
        for _ in range(10):
            err = tracking_error(random_element(tag, 0.5, ("S", "T")), random_element(tag, 0.5, ("S", "D")))
            Vb = random_algebra(tag, frame="D")
            u = control_law(err, Vb, cfg)
            Vs = closed_loop_error_velocity(err.g_TD, u, Vb, h=1e-6)
            assert np.linalg.norm(Vs.matrix + cfg.k * err.xi_TD.matrix) <= 1e-8

    def test_mislabelled_frames_always_raise(self, random_element, random_algebra):
        g_ST = random_element(SE3, frames=("S", "T"))
        g_SD = random_element(SE3, frames=("S", "D"))
        err = tracking_error(g_ST, g_SD)
        cfg = ControllerConfig()
        attempts = [
            lambda: tracking_error(g_ST, g_SD.relabel(("W", "D"))),
            lambda: control_law(err, random_algebra(SE3, frame="T"), cfg),
            lambda: control_law(err, random_algebra(SE3, frame="S"), cfg),
            lambda: compose(g_ST, g_SD),
            lambda: random_algebra(SE3, frame="T") + random_algebra(SE3, frame="D"),
            lambda: control_law(err, random_algebra(SU4, frame="D"), cfg),
        ]
        for attempt in attempts:
            with pytest.raises(FrameCompositionError):
                attempt()


class TestReferenceVelocity:
    def test_identical_samples(self):
        g = GroupElement.identity(SE3, ("S", "D"))
        assert_array_equal(reference_body_velocity_discrete(g, g, 0.01).matrix, np.zeros((4, 4)))

    def test_construction_roundtrip(self, random_element, random_algebra):
        now = random_element(SE3, frames=("S", "D"))
        xi = random_algebra(SE3, frame="D")
        nxt = compose(now, exp(xi * 0.01))
        assert_allclose(reference_body_velocity_discrete(now, nxt, 0.01).matrix, xi.matrix, atol=1e-9)

    def test_helix_velocity_is_recovered(self):
        reference = make_reference("constant_twist", {"tag": SE3, "coordinates": HELIX})
        poses = rollout(reference, 101, 0.01)
        for n in (0, 50, 99):
            V = reference_body_velocity_discrete(poses[n], poses[n + 1], 0.01)
            assert_allclose(vee(SE3, V).vector, HELIX, atol=1e-9)

    def test_half_turn_in_one_step(self):
        now = GroupElement.identity(SO3, ("S", "D"))
        nxt = GroupElement(np.diag([-1.0, -1.0, 1.0]), SO3, ("S", "D"))
        with pytest.raises(BranchDomainError):
            reference_body_velocity_discrete(now, nxt, 0.01)

    def test_non_positive_dt(self):
        g = GroupElement.identity(SE3, ("S", "D"))
        with pytest.raises(InvalidInputError):
            reference_body_velocity_discrete(g, g, 0.0)


class TestPredictedDecay:
    def test_time_zero(self, random_algebra):
        xi0 = random_algebra(SE3, frame="T")
        assert_array_equal(predicted_error_decay(xi0, ControllerConfig(), 0.0).matrix, xi0.matrix)

    def test_half_life(self, random_algebra):
        xi0 = random_algebra(SE3, frame="T")
        half = predicted_error_decay(xi0, ControllerConfig(k=1.0), np.log(2.0))
        assert_allclose(half.matrix, 0.5 * xi0.matrix, atol=1e-15)

    def test_discrete_factor(self, random_algebra):
        xi0 = random_algebra(SU4, frame="T")
        cfg = ControllerConfig(k=1.0, dt=0.01)
        decayed = predicted_error_decay(xi0, cfg, 100, DecayMode.DISCRETE)
        assert decayed.norm() / xi0.norm() == pytest.approx(0.366, abs=1e-3)
        assert_allclose(decayed.matrix, 0.99 ** 100 * xi0.matrix, rtol=1e-14)

    def test_invalid_time_arguments(self, random_algebra):
        xi0 = random_algebra(SO3)
        cfg = ControllerConfig()
        with pytest.raises(InvalidInputError):
            predicted_error_decay(xi0, cfg, -1.0)
        with pytest.raises(InvalidInputError):
            predicted_error_decay(xi0, cfg, 2.5, "discrete")


class TestTrackingController:
    def test_records_branch_ties_and_locality(self):
        controller = TrackingController(ControllerConfig())
        g_ST = GroupElement.identity(SO3, ("S", "T"))
        g_SD = GroupElement(np.diag([-1.0, -1.0, 1.0]), SO3, ("S", "D"))
        u, err = controller.command(g_ST, g_SD, AlgebraElement.zero(SO3, "D"), step=5)
        assert err.branch_tie
        assert_allclose(vee(SO3, u).vector, [0.0, 0.0, np.pi], atol=1e-12)
        assert controller.diagnostics() == {
            "branch_tie_steps": [5],
            "steps_outside_local_region": 1,
            "steps": 1,
        }

    def test_quiet_inside_local_region(self, random_element):
        controller = TrackingController(ControllerConfig())
        g = random_element(SE3, scale=0.1, frames=("S", "T"))
        controller.command(g, g.relabel(("S", "D")), AlgebraElement.zero(SE3, "D"))
        diagnostics = controller.diagnostics()
        assert diagnostics["branch_tie_steps"] == []
        assert diagnostics["steps_outside_local_region"] == 0

    def test_feedforward_tracking_stays_exact(self):
        reference = make_reference("constant_twist", {"tag": SE3, "coordinates": HELIX})
        Vb = reference.velocity
        poses = rollout(reference, 1001, 0.01)
        controller = TrackingController(ControllerConfig())
        g = GroupElement.identity(SE3, ("S", "T"))
        for n in range(1000):
            u, err = controller.command(g, poses[n], Vb, step=n)
            assert err.frobenius <= 1e-12
            g = compose(g, exp(u * 0.01))
        assert identity_deviation(compose(inverse(g), poses[1000]))[0] <= 1e-12


def test_offset_start_has_large_error():
    offset = make_offset_initial_state(SE3, seed=3, min_spectral_radius=1.0)
    err = tracking_error(GroupElement.identity(SE3, ("S", "T")), inverse(offset).relabel(("S", "D")))
    assert not err.in_local_region
    assert_allclose(exp(err.xi_TD).matrix, err.g_TD.matrix, atol=1e-9)
