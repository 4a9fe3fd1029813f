"""
NV spin as a two-level system: pulse rotations, CPMG construction,
Monte Carlo dephasing under Ornstein-Uhlenbeck detuning noise, and
microwave pi-pulse sizing.

Phase convention: |0> is Bloch +z, and a (pi/2)_x pulse takes +z to -y.
All coherence checks use Bloch vectors, so the global phase never matters.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Tuple

import numpy as np

from massive.errors import InvalidInputError
from massive.logging_utils import get_module_logger, log_with_context
from massive.random_streams import chunk_streams, map_chunks, stable_sum
from massive.validation import validate_int_at_least, validate_non_negative, validate_positive

logger = get_module_logger(__name__)

NORM_TOLERANCE = 1e-10

# t_pi = kappa * distance / sqrt(power), anchored at (10 W, 50 um) -> 50 ns
_PI_PULSE_ANCHOR = (10.0, 50e-6, 50e-9)
_PI_PULSE_KAPPA = _PI_PULSE_ANCHOR[2] * math.sqrt(_PI_PULSE_ANCHOR[0]) / _PI_PULSE_ANCHOR[1]


class Basis(str, Enum):
    SINGLE_QUANTUM = "single_quantum"
    DOUBLE_QUANTUM = "double_quantum"

    @property
    def force_multiplier(self) -> float:
        """The |-1>,|+1> superposition sees twice the differential force."""
        return 2.0 if self is Basis.DOUBLE_QUANTUM else 1.0


class Axis(str, Enum):
    X = "x"
    Y = "y"


class NoiseKind(str, Enum):
    NONE = "none"
    ORNSTEIN_UHLENBECK = "ornstein_uhlenbeck"


@dataclass(frozen=True)
class SpinState:
    amplitude_0: complex
    amplitude_1: complex
    basis: Basis = Basis.SINGLE_QUANTUM

    def __post_init__(self):
        object.__setattr__(self, "amplitude_0", complex(self.amplitude_0))
        object.__setattr__(self, "amplitude_1", complex(self.amplitude_1))
        object.__setattr__(self, "basis", Basis(self.basis))

    @classmethod
    def ground(cls, basis: Basis = Basis.SINGLE_QUANTUM) -> "SpinState":
        return cls(1.0 + 0.0j, 0.0 + 0.0j, basis)

    @property
    def norm(self) -> float:
        return abs(self.amplitude_0) ** 2 + abs(self.amplitude_1) ** 2


def bloch_vector(state: SpinState) -> Tuple[float, float, float]:
    """(x, y, z) components of the Bloch vector."""
    cross = state.amplitude_0.conjugate() * state.amplitude_1
    z = abs(state.amplitude_0) ** 2 - abs(state.amplitude_1) ** 2
    return 2.0 * cross.real, 2.0 * cross.imag, z


def rotation_matrix(axis: Axis, angle: float) -> np.ndarray:
    """SU(2) rotation exp(-i angle/2 n.sigma) about an equatorial axis."""
    axis = Axis(axis)
    c = math.cos(angle / 2.0)
    s = math.sin(angle / 2.0)
    if axis is Axis.X:
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def apply_rotation(state: SpinState, axis: Axis, angle: float) -> SpinState:
    """
    Rotate a normalised state about the x or y axis of the Bloch sphere.

    Raises:
        InvalidInputError: If the state is not normalised
    """
    if abs(state.norm - 1.0) > NORM_TOLERANCE:
        raise InvalidInputError(f"apply_rotation: state is not normalised (norm {state.norm!r})")
    u = rotation_matrix(axis, float(angle))
    a0 = u[0, 0] * state.amplitude_0 + u[0, 1] * state.amplitude_1
    a1 = u[1, 0] * state.amplitude_0 + u[1, 1] * state.amplitude_1
    return SpinState(complex(a0), complex(a1), state.basis)


@dataclass(frozen=True)
class Pulse:
    time: float
    axis: Axis
    angle: float

    def __post_init__(self):
        validate_non_negative(self.time, "time", "Pulse")
        object.__setattr__(self, "axis", Axis(self.axis))
        if not 0.0 < self.angle <= 2.0 * math.pi:
            raise InvalidInputError(f"Pulse: angle must lie in (0, 2pi], got {self.angle}")


@dataclass(frozen=True)
class PulseSequence:
    pulses: Tuple[Pulse, ...]
    total_duration: float

    def __post_init__(self):
        object.__setattr__(self, "pulses", tuple(self.pulses))
        validate_positive(self.total_duration, "total_duration", "PulseSequence")
        times = [p.time for p in self.pulses]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise InvalidInputError("PulseSequence: pulse times must be strictly increasing")
        if times and times[-1] > self.total_duration:
            raise InvalidInputError(
                f"PulseSequence: pulse at {times[-1]} s lies after total_duration {self.total_duration} s"
            )

    @property
    def times(self) -> List[float]:
        return [p.time for p in self.pulses]

    @property
    def decoupling_times(self) -> List[float]:
        """Times of the refocusing pulses (everything after the opening pulse)."""
        return self.times[1:]

    def min_gap(self) -> float:
        """Shortest free-evolution interval between consecutive events (pulses and the end)."""
        events = [0.0] + self.times + [self.total_duration]
        gaps = [b - a for a, b in zip(events, events[1:]) if b - a > 0.0]
        return min(gaps)


def build_cpmg(n: int, total_duration: float) -> PulseSequence:
    """
    (pi/2)_x at t = 0 followed by n (pi)_y pulses at t_k = (2k-1) T / (2n).

    Args:
        n: Number of refocusing pulses
        total_duration: Sequence length T, s
    """
    n = validate_int_at_least(n, 1, "n", "build_cpmg")
    total_duration = validate_positive(total_duration, "total_duration", "build_cpmg")
    pulses = [Pulse(0.0, Axis.X, math.pi / 2.0)]
    pulses.extend(
        Pulse((2 * k - 1) * total_duration / (2 * n), Axis.Y, math.pi) for k in range(1, n + 1)
    )
    return PulseSequence(tuple(pulses), total_duration)


def free_induction_sequence(total_duration: float) -> PulseSequence:
    """A lone (pi/2)_x pulse: the undecoupled reference."""
    total_duration = validate_positive(total_duration, "total_duration", "free_induction_sequence")
    return PulseSequence((Pulse(0.0, Axis.X, math.pi / 2.0),), total_duration)


def apply_sequence(state: SpinState, sequence: PulseSequence) -> SpinState:
    """Apply every pulse of a sequence with no free-evolution detuning."""
    for pulse in sequence.pulses:
        state = apply_rotation(state, pulse.axis, pulse.angle)
    return state


@dataclass(frozen=True)
class DephasingNoise:
    kind: NoiseKind = NoiseKind.NONE
    amplitude: float = 0.0
    correlation_time: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        validate_non_negative(self.amplitude, "amplitude", "DephasingNoise")
        validate_positive(self.correlation_time, "correlation_time", "DephasingNoise")


def _segment_steps(start: float, end: float, time_step: float) -> Tuple[int, float]:
    length = end - start
    if length <= 0.0:
        return 0, 0.0
    count = max(1, math.ceil(length / time_step - 1e-9))
    return count, length / count


def _dephasing_chunk(
    size: int,
    rng: np.random.Generator,
    sequence: PulseSequence,
    noise: DephasingNoise,
    time_step: float,
) -> Tuple[float]:
    a0 = np.ones(size, dtype=np.complex128)
    a1 = np.zeros(size, dtype=np.complex128)
    sigma = noise.amplitude
    tau = noise.correlation_time
    delta = rng.standard_normal(size) * sigma

    events = [(p.time, rotation_matrix(p.axis, p.angle)) for p in sequence.pulses]
    events.append((sequence.total_duration, None))
    now = 0.0
    for event_time, matrix in events:
        count, dt = _segment_steps(now, event_time, time_step)
        if count:
            decay = math.exp(-dt / tau)
            kick = sigma * math.sqrt(-math.expm1(-2.0 * dt / tau))
            for _ in range(count):
                nxt = delta * decay + kick * rng.standard_normal(size)
                half_phase = 0.25 * (delta + nxt) * dt
                a0 *= np.exp(-1j * half_phase)
                a1 *= np.exp(1j * half_phase)
                delta = nxt
        now = event_time
        if matrix is not None:
            a0, a1 = matrix[0, 0] * a0 + matrix[0, 1] * a1, matrix[1, 0] * a0 + matrix[1, 1] * a1
    y = 2.0 * np.imag(np.conj(a0) * a1)
    return (float(np.sum(y)),)


def simulate_dephasing(
    sequence: PulseSequence,
    noise: DephasingNoise,
    trials: int,
    time_step: float,
    workers: int = 1,
) -> float:
    """
    Monte Carlo coherence W = |<y>| at the end of a pulse sequence under detuning noise.

    Each trial starts in |0>, experiences a stationary OU detuning between
    instantaneous pulses, and contributes its final Bloch y component.

    Args:
        sequence: Pulse sequence (usually from build_cpmg)
        noise: Detuning noise; kind NONE returns 1 exactly
        trials: Number of Monte Carlo trials
        time_step: Integration step, s
        workers: Threads used for trial chunks (results do not depend on it)

    Returns:
        W in [0, 1]

    Raises:
        InvalidInputError: If time_step is too coarse; the message gives the required step
    """
    trials = validate_int_at_least(trials, 1, "trials", "simulate_dephasing")
    time_step = validate_positive(time_step, "time_step", "simulate_dephasing")
    if noise.kind is NoiseKind.NONE or noise.amplitude == 0.0:
        return 1.0

    required = min(noise.correlation_time / 10.0, sequence.min_gap() / 2.0)
    if time_step > required:
        raise InvalidInputError(
            f"simulate_dephasing: time_step {time_step:.3e} s is too coarse; required <= {required:.3e} s"
        )

    streams = chunk_streams(noise.seed, "spin_dynamics", "dephasing", trials)
    parts = map_chunks(
        lambda size, rng: _dephasing_chunk(size, rng, sequence, noise, time_step),
        streams,
        workers=workers,
    )
    coherence = min(1.0, abs(stable_sum(parts, 0)) / trials)
    log_with_context(
        logger,
        logging.INFO,
        "SpinDynamics",
        "Dephasing simulated",
        {"pulses": len(sequence.pulses), "trials": trials, "amplitude": noise.amplitude, "coherence": coherence}
    )
    return coherence


def pi_pulse_duration(power: float, distance: float) -> float:
    """
    Near-field pi-pulse length, s: Rabi frequency grows as sqrt(P)/d.

    Calibrated so that 10 W at 50 um gives 50 ns.
    """
    power = validate_positive(power, "power", "pi_pulse_duration")
    distance = validate_positive(distance, "distance", "pi_pulse_duration")
    return _PI_PULSE_KAPPA * distance / math.sqrt(power)


def total_pulse_time(sequence: PulseSequence, power: float, distance: float) -> float:
    """Microwave on-time of a sequence: pi pulses at full length, pi/2 at half."""
    t_pi = pi_pulse_duration(power, distance)
    return sum(t_pi * p.angle / math.pi for p in sequence.pulses)

