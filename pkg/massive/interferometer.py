"""
Spin-dependent two-arm kinematics, closure solving, gravitational phase and
phase-jitter analysis.

Only the relative coordinate between the arms is propagated: the common
free fall cancels in the phase. Between interferometer pi pulses each arm
feels a constant spin-dependent force, so the relative motion is piecewise
uniformly accelerated and is integrated in closed form per segment.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import fsolve

from massive.errors import ConvergenceError, InvalidInputError
from massive.logging_utils import get_module_logger, log_with_context
from massive.particle_model import Diamond
from massive.physical_base import CONSTANTS
from massive.random_streams import chunk_streams, map_chunks, stable_sum
from massive.spin_dynamics import Basis
from massive.validation import (
    validate_int_at_least,
    validate_non_negative,
    validate_positive,
)

logger = get_module_logger(__name__)

CLOSURE_TOLERANCE = 1e-9
MIN_PHASE_SAMPLES = 10_000
DEFAULT_SAMPLES = 10_001
MIN_JITTER_DROPS = 100


@dataclass(frozen=True)
class InterferometerTiming:
    """Spin-flip times t1, t2 and interference time t3, measured from the pi/2 pulse."""
    t1: float
    t2: float
    t3: float

    def __post_init__(self):
        for name in ("t1", "t2", "t3"):
            object.__setattr__(self, name, validate_positive(getattr(self, name), name, "InterferometerTiming"))
        if not self.t1 < self.t2 < self.t3:
            raise InvalidInputError(
                f"InterferometerTiming: need 0 < t1 < t2 < t3, got ({self.t1}, {self.t2}, {self.t3})"
            )

    @property
    def total(self) -> float:
        return self.t3

    def scaled(self, factor: float) -> "InterferometerTiming":
        return InterferometerTiming(self.t1 * factor, self.t2 * factor, self.t3 * factor)


@dataclass(frozen=True)
class TiltSpec:
    """Deviation of the gradient from horizontal, as cos(theta)."""
    cos_theta: float = 1e-9

    def __post_init__(self):
        if not -1.0 <= self.cos_theta <= 1.0:
            raise InvalidInputError(f"TiltSpec: |cos_theta| must be <= 1, got {self.cos_theta}")

    @classmethod
    def from_arm_offset(cls, offset: float, arm_length: float = 1.0) -> "TiltSpec":
        """Tilt measured as a height offset at the end of a rigid horizontal arm."""
        arm_length = validate_positive(arm_length, "arm_length", "TiltSpec.from_arm_offset")
        return cls(offset / arm_length)


@dataclass(frozen=True)
class JitterSpec:
    """Fractional run-to-run errors of drop time, gradient and NV g-factor."""
    time: float = 1e-5
    gradient: float = 1e-9
    g_factor: float = 0.0

    def __post_init__(self):
        for name in ("time", "gradient", "g_factor"):
            validate_non_negative(getattr(self, name), name, "JitterSpec")


@dataclass
class ArmTrajectory:
    times: np.ndarray
    relative_displacement: np.ndarray
    relative_velocity: np.ndarray
    max_separation: float
    max_speed: float
    closure_displacement: float
    closure_velocity: float
    acceleration: float
    switch_times: List[float] = field(default_factory=list)

    @property
    def is_closed(self) -> bool:
        scale_z = max(self.max_separation, 1e-300)
        scale_v = max(self.max_speed, 1e-300)
        return (abs(self.closure_displacement) <= CLOSURE_TOLERANCE * scale_z
                and abs(self.closure_velocity) <= CLOSURE_TOLERANCE * scale_v)


def arm_acceleration(diamond: Diamond, gradient: float, basis: Basis = Basis.SINGLE_QUANTUM) -> float:
    """Relative acceleration g mu_B (dB/dx) / m, doubled for the double-quantum basis."""
    gradient = validate_non_negative(gradient, "gradient", "arm_acceleration")
    mass = validate_positive(diamond.mass, "mass", "arm_acceleration")
    force = CONSTANTS.nv_g_factor * CONSTANTS.bohr_magneton * gradient
    return Basis(basis).force_multiplier * force / mass


def ballistic_separation(acceleration: float, t: float) -> float:
    """s = a t^2 / 2."""
    t = validate_non_negative(t, "t", "ballistic_separation")
    return 0.5 * acceleration * t * t


def coherence_limited_separation(acceleration: float, coherence_time: float) -> float:
    """Separation reachable when opening and closing must both fit in one coherence time."""
    coherence_time = validate_non_negative(coherence_time, "coherence_time", "coherence_limited_separation")
    return ballistic_separation(acceleration, coherence_time / 2.0)


def _segments(acceleration: float, switch_times: Sequence[float], t_end: float) -> List[Tuple[float, float, float, float, float]]:
    """(start, end, acc, z0, v0) for each constant-acceleration piece on [0, t_end]."""
    bounds = [0.0] + [t for t in switch_times if 0.0 < t < t_end] + [t_end]
    pieces = []
    z, v, acc = 0.0, 0.0, acceleration
    for start, end in zip(bounds, bounds[1:]):
        pieces.append((start, end, acc, z, v))
        tau = end - start
        z = z + v * tau + 0.5 * acc * tau * tau
        v = v + acc * tau
        acc = -acc
    return pieces


def _end_state(pieces) -> Tuple[float, float]:
    start, end, acc, z0, v0 = pieces[-1]
    tau = end - start
    return z0 + v0 * tau + 0.5 * acc * tau * tau, v0 + acc * tau


def _extrema(pieces) -> Tuple[float, float]:
    """Exact max |dz| and max |dv| over all pieces, including interior turning points."""
    max_z = 0.0
    max_v = 0.0
    for start, end, acc, z0, v0 in pieces:
        tau = end - start
        v1 = v0 + acc * tau
        z1 = z0 + v0 * tau + 0.5 * acc * tau * tau
        max_z = max(max_z, abs(z0), abs(z1))
        max_v = max(max_v, abs(v0), abs(v1))
        if acc != 0.0:
            t_turn = -v0 / acc
            if 0.0 < t_turn < tau:
                max_z = max(max_z, abs(z0 + v0 * t_turn + 0.5 * acc * t_turn * t_turn))
    return max_z, max_v


def _switch_times(timing: InterferometerTiming, strict_dd_forces: bool, dd_pulse_times: Optional[Sequence[float]]) -> List[float]:
    switches = [timing.t1, timing.t2]
    if strict_dd_forces and dd_pulse_times:
        switches.extend(float(t) for t in dd_pulse_times)
    return sorted(switches)


def closure_residuals(acceleration: float, timing: InterferometerTiming) -> Tuple[float, float]:
    """(dz(t3), dv(t3)) for the plain three-flip profile."""
    return _end_state(_segments(acceleration, [timing.t1, timing.t2], timing.t3))


def propagate_arms(
    acceleration: float,
    timing: InterferometerTiming,
    samples: int = DEFAULT_SAMPLES,
    strict_dd_forces: bool = False,
    dd_pulse_times: Optional[Sequence[float]] = None,
) -> ArmTrajectory:
    """
    Relative arm motion for +a, -a, +a on [0,t1], [t1,t2], [t2,t3].

    Args:
        acceleration: Relative acceleration a, m/s^2
        timing: Flip and interference times
        samples: Number of uniformly spaced samples on [0, t3] (>= 100)
        strict_dd_forces: Also flip the force at every decoupling pulse
        dd_pulse_times: Decoupling pulse times, s from the pi/2 pulse

    Returns:
        ArmTrajectory with sampled dz, dv and exact closure values
    """
    if not isinstance(timing, InterferometerTiming):
        raise InvalidInputError("propagate_arms: timing must be an InterferometerTiming")
    samples = validate_int_at_least(samples, 100, "samples", "propagate_arms")
    switches = _switch_times(timing, strict_dd_forces, dd_pulse_times)
    pieces = _segments(acceleration, switches, timing.t3)

    times = np.linspace(0.0, timing.t3, samples)
    starts = np.array([p[0] for p in pieces])
    idx = np.clip(np.searchsorted(starts, times, side="right") - 1, 0, len(pieces) - 1)
    acc = np.array([p[2] for p in pieces])[idx]
    z0 = np.array([p[3] for p in pieces])[idx]
    v0 = np.array([p[4] for p in pieces])[idx]
    tau = times - starts[idx]
    dz = z0 + v0 * tau + 0.5 * acc * tau * tau
    dv = v0 + acc * tau

    closure_z, closure_v = _end_state(pieces)
    dz[-1], dv[-1] = closure_z, closure_v
    max_z, max_v = _extrema(pieces)
    return ArmTrajectory(
        times=times,
        relative_displacement=dz,
        relative_velocity=dv,
        max_separation=max_z,
        max_speed=max_v,
        closure_displacement=closure_z,
        closure_velocity=closure_v,
        acceleration=acceleration,
        switch_times=switches,
    )


def solve_closure(t1: float, initial_ratios: Tuple[float, float] = (2.5, 3.5)) -> InterferometerTiming:
    """
    Find t2, t3 so that the arms meet with zero relative velocity at t3.

    Solved in units of t1 with unit acceleration (the closure conditions do
    not depend on a), so the result is (t1, 3 t1, 4 t1) for this profile.

    Raises:
        ConvergenceError: If the root finder fails or lands on an invalid ordering
    """
    t1 = validate_positive(t1, "t1", "solve_closure")

    def residuals(ratios):
        x, y = ratios
        pieces = _segments(1.0, sorted([1.0, x]), max(y, 1e-12))
        return list(_end_state(pieces))

    solution, info, ier, message = fsolve(residuals, list(initial_ratios), full_output=True, xtol=1e-14)
    best = float(np.max(np.abs(info["fvec"])))
    x, y = float(solution[0]), float(solution[1])
    if not 1.0 < x < y:
        raise ConvergenceError(f"solve_closure did not converge: {message}", best)

    timing = InterferometerTiming(t1, x * t1, y * t1)
    pieces = _segments(1.0, [1.0, x], y)
    max_z, max_v = _extrema(pieces)
    dz, dv = _end_state(pieces)
    if abs(dz) > CLOSURE_TOLERANCE * max_z or abs(dv) > CLOSURE_TOLERANCE * max_v:
        raise ConvergenceError("solve_closure residuals above tolerance", max(abs(dz) / max_z, abs(dv) / max_v))

    log_with_context(
        logger,
        logging.INFO,
        "Interferometer",
        "Closure solved",
        {"t1": timing.t1, "t2": timing.t2, "t3": timing.t3, "residual": best}
    )
    return timing


def gravitational_phase(trajectory: ArmTrajectory, diamond: Diamond, tilt: TiltSpec) -> float:
    """
    Phase (m g cos(theta) / hbar) * integral of dz dt over the closed loop, rad.

    Because dz scales as 1/m, the result does not depend on the diamond mass.

    Raises:
        InvalidInputError: If the trajectory does not close or is too coarsely sampled
    """
    if not trajectory.is_closed:
        raise InvalidInputError(
            f"gravitational_phase: trajectory is not closed (dz = {trajectory.closure_displacement:.3e} m, "
            f"dv = {trajectory.closure_velocity:.3e} m/s)"
        )
    if len(trajectory.times) < MIN_PHASE_SAMPLES:
        raise InvalidInputError(
            f"gravitational_phase: need >= {MIN_PHASE_SAMPLES} samples, got {len(trajectory.times)}"
        )
    area = float(trapezoid(trajectory.relative_displacement, trajectory.times))
    prefactor = diamond.mass * CONSTANTS.g_earth * tilt.cos_theta / CONSTANTS.reduced_planck
    return prefactor * area


def expected_visibility(phase_scale: float, errors: JitterSpec) -> float:
    """Gaussian closed form exp(-phi^2 (9 e_t^2 + e_B^2 + e_g^2) / 2)."""
    variance = phase_scale ** 2 * (9.0 * errors.time ** 2 + errors.gradient ** 2 + errors.g_factor ** 2)
    return math.exp(-0.5 * variance)


def _jitter_chunk(size: int, rng: np.random.Generator, phase_scale: float, errors: JitterSpec) -> Tuple[float, float]:
    xi = rng.standard_normal((3, size))
    factor = (1.0 + errors.time * xi[0]) ** 3 * (1.0 + errors.gradient * xi[1]) * (1.0 + errors.g_factor * xi[2])
    deviation = phase_scale * (factor - 1.0)
    return float(np.sum(np.cos(deviation))), float(np.sum(np.sin(deviation)))


def phase_jitter_visibility(
    phase_scale: float,
    errors: JitterSpec,
    n_drops: int,
    seed: int,
    workers: int = 1,
) -> float:
    """
    Monte Carlo fringe visibility |mean exp(i phi_i)| under fractional control errors.

    phi_i = phi_0 (1 + e_t xi)^3 (1 + e_B xi') (1 + e_g xi''); the common
    phi_0 factor is removed before averaging, which leaves the modulus unchanged.
    """
    phase_scale = float(phase_scale)
    n_drops = validate_int_at_least(n_drops, MIN_JITTER_DROPS, "n_drops", "phase_jitter_visibility")
    streams = chunk_streams(seed, "interferometer", "phase_jitter", n_drops)
    parts = map_chunks(lambda size, rng: _jitter_chunk(size, rng, phase_scale, errors), streams, workers=workers)
    visibility = math.hypot(stable_sum(parts, 0), stable_sum(parts, 1)) / n_drops
    return min(1.0, visibility)


def free_fall_time(height: float) -> float:
    """sqrt(2 h / g)."""
    height = validate_positive(height, "height", "free_fall_time")
    return math.sqrt(2.0 * height / CONSTANTS.g_earth)


def fall_distance(t: float) -> float:
    """g t^2 / 2."""
    t = validate_non_negative(t, "t", "fall_distance")
    return 0.5 * CONSTANTS.g_earth * t * t
