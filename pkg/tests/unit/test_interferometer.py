"""
Tests for arm kinematics, closure solving, the gravitational phase and phase jitter.
"""
import logging
import math

import numpy as np
import pytest

from massive.errors import InvalidInputError
from massive.interferometer import (
    InterferometerTiming,
    JitterSpec,
    TiltSpec,
    arm_acceleration,
    ballistic_separation,
    closure_residuals,
    coherence_limited_separation,
    expected_visibility,
    fall_distance,
    free_fall_time,
    gravitational_phase,
    phase_jitter_visibility,
    propagate_arms,
    solve_closure,
)
from massive.particle_model import build_diamond
from massive.spin_dynamics import Basis, build_cpmg

ACCELERATION = 1.0108e-4


@pytest.fixture
def timing():
    return InterferometerTiming(0.1, 0.3, 0.4)


@pytest.mark.unit
class TestAcceleration:
    def test_default_acceleration(self, default_diamond):
        assert arm_acceleration(default_diamond, 1e4) == pytest.approx(ACCELERATION, rel=1e-3)

    def test_double_quantum_doubles(self, default_diamond):
        single = arm_acceleration(default_diamond, 1e4)
        assert arm_acceleration(default_diamond, 1e4, Basis.DOUBLE_QUANTUM) == pytest.approx(2 * single)

    def test_inverse_in_mass(self, default_diamond):
        heavy = default_diamond.with_radius(1e-6)
        ratio = arm_acceleration(default_diamond, 1e4) / arm_acceleration(heavy, 1e4)
        assert ratio == pytest.approx(8.0, rel=1e-12)

    def test_negative_gradient_rejected(self, default_diamond):
        with pytest.raises(InvalidInputError):
            arm_acceleration(default_diamond, -1.0)

    def test_separation_at_two_t1(self):
        assert ballistic_separation(ACCELERATION, 0.2) == pytest.approx(2.02e-6, rel=0.02)

    def test_coherence_limited_separation(self):
        assert coherence_limited_separation(2.0, 2.0) == pytest.approx(1.0)


@pytest.mark.unit
class TestTiming:
    def test_ordering_enforced(self):
        with pytest.raises(InvalidInputError):
            InterferometerTiming(0.3, 0.1, 0.4)

    def test_scaled(self, timing):
        assert timing.scaled(2.0) == InterferometerTiming(0.2, 0.6, 0.8)

    def test_tilt_bounds(self):
        with pytest.raises(InvalidInputError):
            TiltSpec(1.5)

    def test_tilt_from_arm_offset(self):
        assert TiltSpec.from_arm_offset(1e-9).cos_theta == pytest.approx(1e-9)


@pytest.mark.unit
class TestPropagation:
    def test_exact_closure(self, timing):
        dz, dv = closure_residuals(ACCELERATION, timing)
        scale_z = ACCELERATION * timing.t1 ** 2
        assert abs(dz) < 1e-9 * scale_z
        assert abs(dv) < 1e-9 * ACCELERATION * timing.t1

    def test_max_separation_at_two_t1(self, timing):
        trajectory = propagate_arms(ACCELERATION, timing)
        assert trajectory.is_closed
        assert trajectory.max_separation == pytest.approx(ACCELERATION * 0.01, rel=1e-12)
        peak = int(np.argmax(trajectory.relative_displacement))
        assert trajectory.times[peak] == pytest.approx(0.2, abs=1e-4)

    def test_closure_sample_is_exact(self, timing):
        trajectory = propagate_arms(ACCELERATION, timing, samples=101)
        assert trajectory.relative_displacement[-1] == trajectory.closure_displacement
        assert len(trajectory.times) == 101

    def test_wrong_timing_does_not_close(self):
        trajectory = propagate_arms(ACCELERATION, InterferometerTiming(0.1, 0.25, 0.4))
        assert not trajectory.is_closed

    def test_strict_decoupling_forces_shrink_separation(self, timing):
        plain = propagate_arms(ACCELERATION, timing)
        strict = propagate_arms(ACCELERATION, timing, strict_dd_forces=True,
                                dd_pulse_times=build_cpmg(100, timing.t3).decoupling_times)
        assert strict.max_separation < plain.max_separation

    def test_too_few_samples(self, timing):
        with pytest.raises(InvalidInputError):
            propagate_arms(ACCELERATION, timing, samples=10)


@pytest.mark.unit
class TestClosureSolver:
    def test_default(self, caplog):
        with caplog.at_level(logging.INFO, logger="massive.interferometer"):
            solved = solve_closure(0.1)
        assert (solved.t1, solved.t2, solved.t3) == pytest.approx((0.1, 0.3, 0.4), rel=1e-9)
        assert any("Closure solved" in r.getMessage() for r in caplog.records)

    def test_random_t1_values(self):
        rng = np.random.default_rng(11)
        for t1 in rng.uniform(1e-3, 1.0, size=20):
            solved = solve_closure(float(t1))
            assert solved.t2 / solved.t1 == pytest.approx(3.0, rel=1e-9)
            assert solved.t3 / solved.t1 == pytest.approx(4.0, rel=1e-9)
            assert propagate_arms(ACCELERATION, solved, samples=101).is_closed

    def test_non_positive_t1(self):
        with pytest.raises(InvalidInputError):
            solve_closure(0.0)


@pytest.mark.unit
class TestGravitationalPhase:
    def test_closed_form(self, timing, default_diamond):
        trajectory = propagate_arms(ACCELERATION, timing)
        phase = gravitational_phase(trajectory, default_diamond, TiltSpec(1e-9))
        area = 2.0 * trajectory.acceleration * timing.t1 ** 3
        expected = default_diamond.mass * 9.81 * 1e-9 * area / 1.0546e-34
        assert phase == pytest.approx(expected, rel=1e-6)
        assert phase == pytest.approx(3.456e4, rel=0.01)

    def test_mass_independent(self, timing, default_diamond):
        heavy = build_diamond(0.5e-6 * 10 ** (1 / 3))
        light_phase = gravitational_phase(
            propagate_arms(arm_acceleration(default_diamond, 1e4), timing), default_diamond, TiltSpec())
        heavy_phase = gravitational_phase(
            propagate_arms(arm_acceleration(heavy, 1e4), timing), heavy, TiltSpec())
        assert abs(heavy_phase / light_phase - 1.0) < 1e-10

    def test_cubic_in_total_time(self, default_diamond):
        a = arm_acceleration(default_diamond, 1e4)
        totals = np.geomspace(0.04, 0.4, 5)
        phases = [
            gravitational_phase(propagate_arms(a, InterferometerTiming(t / 4, 3 * t / 4, t)), default_diamond, TiltSpec())
            for t in totals
        ]
        slope = np.polyfit(np.log(totals), np.log(phases), 1)[0]
        assert slope == pytest.approx(3.0, abs=1e-3)

    def test_level_gradient_has_no_phase(self, timing, default_diamond):
        trajectory = propagate_arms(ACCELERATION, timing)
        assert gravitational_phase(trajectory, default_diamond, TiltSpec(0.0)) == 0.0

    def test_open_loop_rejected(self, default_diamond):
        trajectory = propagate_arms(ACCELERATION, InterferometerTiming(0.1, 0.25, 0.4))
        with pytest.raises(InvalidInputError, match="not closed"):
            gravitational_phase(trajectory, default_diamond, TiltSpec())

    def test_coarse_sampling_rejected(self, timing, default_diamond):
        trajectory = propagate_arms(ACCELERATION, timing, samples=500)
        with pytest.raises(InvalidInputError, match="samples"):
            gravitational_phase(trajectory, default_diamond, TiltSpec())


@pytest.mark.unit
class TestPhaseJitter:
    def test_no_jitter_full_visibility(self):
        errors = JitterSpec(0.0, 0.0, 0.0)
        assert phase_jitter_visibility(3.5e4, errors, 500, seed=1) == pytest.approx(1.0, abs=1e-12)
        assert expected_visibility(3.5e4, errors) == 1.0

    def test_closed_form_value(self):
        assert expected_visibility(3.456e4, JitterSpec(1e-5, 0.0, 0.0)) == pytest.approx(0.576, abs=0.005)

    def test_monte_carlo_matches_closed_form(self):
        errors = JitterSpec(1e-5, 0.0, 0.0)
        visibility = phase_jitter_visibility(3.5e4, errors, 20_000, seed=20180801)
        assert visibility == pytest.approx(expected_visibility(3.5e4, errors), abs=0.05)

    def test_large_jitter_washes_out(self):
        assert phase_jitter_visibility(3.5e4, JitterSpec(1e-4, 0.0, 0.0), 20_000, seed=5) < 0.05

    def test_worker_count_does_not_change_result(self):
        errors = JitterSpec(1e-5, 1e-6, 0.0)
        assert phase_jitter_visibility(3.5e4, errors, 3000, 9, workers=1) == \
            phase_jitter_visibility(3.5e4, errors, 3000, 9, workers=3)

    def test_minimum_drop_count(self):
        with pytest.raises(InvalidInputError):
            phase_jitter_visibility(1.0, JitterSpec(), 10, seed=1)


@pytest.mark.unit
class TestFreeFall:
    def test_fall_time_over_drop_height(self):
        assert free_fall_time(1.5) == pytest.approx(0.553, abs=1e-3)

    def test_distance_inverts_time(self):
        assert fall_distance(free_fall_time(1.5)) == pytest.approx(1.5, rel=1e-12)

    def test_window_position(self):
        assert fall_distance(0.4) == pytest.approx(0.785, abs=1e-3)
        assert math.isclose(fall_distance(0.0), 0.0)
