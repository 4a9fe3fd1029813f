"""
The twelve-step drop protocol as a gated state machine, the microwave
antenna scheduler and the campaign orchestrator.

Steps advance strictly in order. A failed gate returns the machine to Trap
with the attempt counter incremented; passing CoherenceAudit starts the
next cycle at Trap.
"""
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Any, Callable, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from massive.errors import (
    CoverageError,
    InvalidInputError,
    MassiveError,
    MissingEvidenceError,
    ProtocolStepError,
)
from massive.interferometer import (
    ArmTrajectory,
    InterferometerTiming,
    arm_acceleration,
    free_fall_time,
    gravitational_phase,
    phase_jitter_visibility,
    propagate_arms,
)
from massive.logging_utils import get_module_logger, log_with_context
from massive.magnetics import downstream_gradient
from massive.particle_model import (
    Diamond,
    hbt_g2,
    is_single_emitter,
    sample_orientation_counts,
    single_orientation_probability,
)
from massive.physical_base import CONSTANTS
from massive.random_streams import named_stream
from massive.readout_stats import FringeDataset, FringeFit, fit_fringes, simulate_fringe_scan
from massive.spin_dynamics import build_cpmg
from massive.validation import validate_int_at_least, validate_positive
from massive.vacuum_thermal import collision_expectation, cooling_report

if TYPE_CHECKING:
    from massive.scenario import Scenario

logger = get_module_logger(__name__)

DEFAULT_GATES_PATH = Path(__file__).resolve().parent.parent / "config" / "protocol_gates.json"
TOLERANCE_SLACK = 1e-9  # relative


class ProtocolStep(str, Enum):
    TRAP = "Trap"
    SPECTRUM = "Spectrum"
    HBT = "HBT"
    ODMR = "ODMR"
    COOL_PURGE = "CoolPurge"
    POLARIZE_DROP = "PolarizeDrop"
    SUPERPOSE = "Superpose"
    GRADIENT_FALL = "GradientFall"
    CLOSE_AND_SLOW = "CloseAndSlow"
    CATCH_READOUT = "CatchReadout"
    REPEAT_SCAN = "RepeatScan"
    COHERENCE_AUDIT = "CoherenceAudit"

    @property
    def next(self) -> "ProtocolStep":
        steps = list(ProtocolStep)
        return steps[(steps.index(self) + 1) % len(steps)]


class RejectionReason(str, Enum):
    MASS_NOT_MEASURED = "mass_not_measured"
    MASS_OUT_OF_WINDOW = "mass_out_of_window"
    NOT_NEUTRAL = "not_neutral"
    NO_NV_SPECTRUM = "no_nv_spectrum"
    TOO_MANY_EMITTERS = "too_many_emitters"
    MISALIGNED = "misaligned"
    NOT_COLD = "not_cold"
    COOLING_BUDGET = "cooling_budget"
    BAD_PRESSURE_SCHEDULE = "bad_pressure_schedule"
    NOT_POLARIZED = "not_polarized"
    PRESSURE_TOO_HIGH = "pressure_too_high"
    PULSE_FAILED = "pulse_failed"
    DECOHERED = "decohered"
    NOT_CLOSED = "not_closed"


# Evidence each step needs before its gate can be evaluated.
REQUIRED_EVIDENCE: Dict[ProtocolStep, Tuple[str, ...]] = {
    ProtocolStep.TRAP: ("mass_measured", "mass", "charge_neutral"),
    ProtocolStep.SPECTRUM: ("nv_spectrum",),
    ProtocolStep.HBT: ("g2",),
    ProtocolStep.ODMR: ("aligned", "bias_field"),
    ProtocolStep.COOL_PURGE: ("temperature", "cooled_ok", "pressure_schedule"),
    ProtocolStep.POLARIZE_DROP: ("polarized", "drop_pressure"),
    ProtocolStep.SUPERPOSE: ("pulse_applied",),
    ProtocolStep.GRADIENT_FALL: ("expected_collisions",),
    ProtocolStep.CLOSE_AND_SLOW: ("closure_residual", "timing_error"),
    ProtocolStep.CATCH_READOUT: ("readout_complete",),
    ProtocolStep.REPEAT_SCAN: ("scan_points",),
    ProtocolStep.COHERENCE_AUDIT: (),
}


@dataclass(frozen=True)
class GateConfig:
    hbt_g2_limit: float = 0.5
    cooling_temperature_limit: float = 10.0
    pressure_schedule: Tuple[float, ...] = (101325.0, 1e4, 1e-4)
    drop_pressure_limit: float = 1e-4
    bias_field_min: float = 0.05
    closure_tolerance: float = 1e-9
    timing_tolerance: float = 4e-6
    mass_window: Tuple[float, float] = (1e-16, 1e-14)
    max_attempts_per_particle: int = 10_000
    pass_probabilities: Mapping[str, float] = field(default_factory=lambda: {
        "mass_measurement": 1.0,
        "charge_neutralisation": 1.0,
        "fluorescence_spectrum": 1.0,
        "odmr_alignment": 1.0,
    })

    def timing_ok(self, timing_error: float) -> bool:
        return timing_error <= self.timing_tolerance * (1.0 + TOLERANCE_SLACK)

    def pass_probability(self, name: str) -> float:
        return float(self.pass_probabilities.get(name, 1.0))

    @classmethod
    def from_dict(cls, config: Mapping[str, Any]) -> "GateConfig":
        gates = config.get("gates", {})
        defaults = cls()
        probabilities = dict(defaults.pass_probabilities)
        probabilities.update(config.get("pass_probabilities", {}))
        for name, p in probabilities.items():
            if not 0.0 <= float(p) <= 1.0:
                raise InvalidInputError(f"gate config: pass probability {name} must lie in [0, 1], got {p}")
        return cls(
            hbt_g2_limit=float(gates.get("hbt_g2_limit", defaults.hbt_g2_limit)),
            cooling_temperature_limit=float(gates.get("cooling_temperature_limit_k", defaults.cooling_temperature_limit)),
            pressure_schedule=tuple(float(p) for p in gates.get("pressure_schedule_pa", defaults.pressure_schedule)),
            drop_pressure_limit=float(gates.get("drop_pressure_limit_pa", defaults.drop_pressure_limit)),
            bias_field_min=float(gates.get("bias_field_min_t", defaults.bias_field_min)),
            closure_tolerance=float(gates.get("closure_tolerance", defaults.closure_tolerance)),
            timing_tolerance=float(gates.get("timing_tolerance_s", defaults.timing_tolerance)),
            mass_window=tuple(float(m) for m in gates.get("mass_window_kg", defaults.mass_window)),
            max_attempts_per_particle=int(gates.get("max_attempts_per_particle", defaults.max_attempts_per_particle)),
            pass_probabilities=probabilities,
        )


def load_gate_config(path: Optional[Union[str, Path]] = None) -> GateConfig:
    """Load gate thresholds from JSON, falling back to built-in defaults."""
    path = Path(path) if path is not None else DEFAULT_GATES_PATH
    try:
        with open(path, "r", encoding="utf-8") as f:
            config = json.load(f)
        log_with_context(logger, logging.DEBUG, "Protocol", "Loaded gate config", {"path": str(path)})
        return GateConfig.from_dict(config)
    except (OSError, json.JSONDecodeError) as e:
        log_with_context(
            logger,
            logging.WARNING,
            "Protocol",
            "Could not load gate config, using defaults",
            {"path": str(path), "error": str(e)}
        )
        return GateConfig()


@dataclass(frozen=True)
class ProtocolState:
    step: ProtocolStep = ProtocolStep.TRAP
    attempt_count: int = 0
    evidence: Mapping[str, Mapping[str, Any]] = field(default_factory=dict)
    flags: Tuple[str, ...] = ()
    completed_cycles: int = 0


@dataclass(frozen=True)
class Rejection:
    step: ProtocolStep
    reason: RejectionReason
    detail: str
    state: ProtocolState

    @property
    def gate(self) -> str:
        return f"{self.step.value}:{self.reason.value}"


GateResult = Optional[Tuple[RejectionReason, str]]


def _gate_trap(ev: Mapping[str, Any], gates: GateConfig) -> GateResult:
    if not ev["mass_measured"]:
        return RejectionReason.MASS_NOT_MEASURED, "power-spectral-density fit failed"
    low, high = gates.mass_window
    if not low <= float(ev["mass"]) <= high:
        return RejectionReason.MASS_OUT_OF_WINDOW, f"mass {float(ev['mass']):.3e} kg outside [{low:.1e}, {high:.1e}]"
    if not ev["charge_neutral"]:
        return RejectionReason.NOT_NEUTRAL, "particle still charged"
    return None


def _gate_spectrum(ev: Mapping[str, Any], gates: GateConfig) -> GateResult:
    if not ev["nv_spectrum"]:
        return RejectionReason.NO_NV_SPECTRUM, "no NV- fluorescence spectrum"
    return None


def _gate_hbt(ev: Mapping[str, Any], gates: GateConfig) -> GateResult:
    g2 = float(ev["g2"])
    if not is_single_emitter(g2, gates.hbt_g2_limit):
        return RejectionReason.TOO_MANY_EMITTERS, f"g2(0) = {g2:.3f} >= {gates.hbt_g2_limit}"
    return None


def _gate_odmr(ev: Mapping[str, Any], gates: GateConfig) -> GateResult:
    if not ev["aligned"] or float(ev["bias_field"]) < gates.bias_field_min:
        return RejectionReason.MISALIGNED, f"bias field {float(ev['bias_field']):.3g} T, aligned={bool(ev['aligned'])}"
    return None


def _schedule_ok(schedule: List[float], gates: GateConfig) -> bool:
    if len(schedule) < 2 or any(b >= a for a, b in zip(schedule, schedule[1:])):
        return False
    if schedule[0] < 0.95 * gates.pressure_schedule[0] or schedule[-1] > gates.drop_pressure_limit:
        return False
    purge = gates.pressure_schedule[1:-1]
    return all(any(0.5 * p <= s <= 2.0 * p for s in schedule[1:-1]) for p in purge)


def _gate_cool_purge(ev: Mapping[str, Any], gates: GateConfig) -> GateResult:
    temperature = float(ev["temperature"])
    if temperature > gates.cooling_temperature_limit:
        return RejectionReason.NOT_COLD, f"internal temperature {temperature:.3g} K"
    if not ev["cooled_ok"]:
        return RejectionReason.COOLING_BUDGET, "helium heat capacity below required ratio"
    schedule = [float(p) for p in ev["pressure_schedule"]]
    if not _schedule_ok(schedule, gates):
        return RejectionReason.BAD_PRESSURE_SCHEDULE, f"pressure schedule {schedule} Pa"
    return None


def _gate_polarize_drop(ev: Mapping[str, Any], gates: GateConfig) -> GateResult:
    if not ev["polarized"]:
        return RejectionReason.NOT_POLARIZED, "spin not initialised"
    if float(ev["drop_pressure"]) > gates.drop_pressure_limit:
        return RejectionReason.PRESSURE_TOO_HIGH, f"drop pressure {float(ev['drop_pressure']):.3e} Pa"
    return None


def _gate_superpose(ev: Mapping[str, Any], gates: GateConfig) -> GateResult:
    if not ev["pulse_applied"]:
        return RejectionReason.PULSE_FAILED, "pi/2 pulse not applied"
    return None


def _gate_gradient_fall(ev: Mapping[str, Any], gates: GateConfig) -> GateResult:
    n = float(ev["expected_collisions"])
    if n >= 1.0:
        return RejectionReason.DECOHERED, f"expected gas collisions {n:.3g} >= 1"
    return None


def _gate_close_and_slow(ev: Mapping[str, Any], gates: GateConfig) -> GateResult:
    residual = float(ev["closure_residual"])
    if residual > gates.closure_tolerance:
        return RejectionReason.NOT_CLOSED, f"closure residual {residual:.3e}"
    return None


def _no_gate(ev: Mapping[str, Any], gates: GateConfig) -> GateResult:
    return None


GATES: Dict[ProtocolStep, Callable[[Mapping[str, Any], GateConfig], GateResult]] = {
    ProtocolStep.TRAP: _gate_trap,
    ProtocolStep.SPECTRUM: _gate_spectrum,
    ProtocolStep.HBT: _gate_hbt,
    ProtocolStep.ODMR: _gate_odmr,
    ProtocolStep.COOL_PURGE: _gate_cool_purge,
    ProtocolStep.POLARIZE_DROP: _gate_polarize_drop,
    ProtocolStep.SUPERPOSE: _gate_superpose,
    ProtocolStep.GRADIENT_FALL: _gate_gradient_fall,
    ProtocolStep.CLOSE_AND_SLOW: _gate_close_and_slow,
    ProtocolStep.CATCH_READOUT: _no_gate,
    ProtocolStep.REPEAT_SCAN: _no_gate,
    ProtocolStep.COHERENCE_AUDIT: _no_gate,
}


def advance(
    state: ProtocolState,
    evidence: Mapping[str, Any],
    gates: Optional[GateConfig] = None,
) -> Union[ProtocolState, Rejection]:
    """
    Evaluate the current step's gate and move to the next step.

    Args:
        state: Current protocol state
        evidence: Measurements for the current step (see REQUIRED_EVIDENCE)
        gates: Gate thresholds; built-in defaults when omitted

    Returns:
        The next ProtocolState, or a Rejection whose ``state`` is back at Trap

    Raises:
        MissingEvidenceError: If a required evidence field is absent
    """
    gates = gates or GateConfig()
    step = state.step
    for name in REQUIRED_EVIDENCE[step]:
        if name not in evidence:
            raise MissingEvidenceError(step.value, name)

    failure = GATES[step](evidence, gates)
    if failure is not None:
        reason, detail = failure
        log_with_context(
            logger,
            logging.DEBUG,
            "Protocol",
            "Gate rejected",
            {"step": step.value, "reason": reason.value, "detail": detail, "attempt": state.attempt_count}
        )
        restart = ProtocolState(
            ProtocolStep.TRAP,
            state.attempt_count + 1,
            {},
            state.flags,
            state.completed_cycles,
        )
        return Rejection(step, reason, detail, restart)

    flags = state.flags
    if step is ProtocolStep.CLOSE_AND_SLOW and not gates.timing_ok(float(evidence["timing_error"])):
        log_with_context(
            logger,
            logging.WARNING,
            "Protocol",
            "Drop-time control outside tolerance: pseudo-random phase risk",
            {"timing_error_s": float(evidence["timing_error"]), "tolerance_s": gates.timing_tolerance}
        )
        if "pseudo_random_phase_risk" not in flags:
            flags = flags + ("pseudo_random_phase_risk",)

    if step is ProtocolStep.COHERENCE_AUDIT:
        return ProtocolState(ProtocolStep.TRAP, state.attempt_count, {}, flags, state.completed_cycles + 1)

    merged = dict(state.evidence)
    merged[step.value] = dict(evidence)
    return replace(state, step=step.next, evidence=merged, flags=flags)


@dataclass(frozen=True)
class AntennaLayout:
    count: int = 150
    length: float = 0.01
    standoff: float = 50e-6

    def __post_init__(self):
        validate_int_at_least(self.count, 1, "count", "AntennaLayout")
        validate_positive(self.length, "length", "AntennaLayout")
        validate_positive(self.standoff, "standoff", "AntennaLayout")

    @property
    def coverage(self) -> float:
        return self.count * self.length


@dataclass(frozen=True)
class DropPlan:
    height: float = 1.5
    window: float = 0.4
    hole_radius: float = 25e-6

    def __post_init__(self):
        validate_positive(self.height, "height", "DropPlan")
        validate_positive(self.window, "window", "DropPlan")
        validate_positive(self.hole_radius, "hole_radius", "DropPlan")
        if self.window > self.fall_time:
            raise InvalidInputError(
                f"DropPlan: window {self.window} s exceeds the {self.fall_time:.4f} s free fall over {self.height} m"
            )

    @property
    def fall_time(self) -> float:
        return free_fall_time(self.height)

    @property
    def slack(self) -> float:
        return self.fall_time - self.window

    def window_note(self) -> str:
        return (
            f"free fall over {self.height:g} m takes {self.fall_time:.3f} s; "
            f"the {self.window:g} s interferometry window starts at release, leaving {self.slack:.3f} s of slack"
        )


@dataclass
class AntennaSchedule:
    pulse_times: np.ndarray
    positions: np.ndarray
    indices: np.ndarray
    pulse_counts: np.ndarray
    switch_times: List[Tuple[float, int, int]]

    @property
    def max_index(self) -> int:
        return int(self.indices.max()) if len(self.indices) else 0

    @property
    def antennas_used(self) -> int:
        return int(np.count_nonzero(self.pulse_counts))

    def rows(self) -> List[Dict[str, Any]]:
        """Per-antenna rows for CSV output: only antennas that fire."""
        out = []
        for index in np.flatnonzero(self.pulse_counts):
            times = self.pulse_times[self.indices == index]
            out.append({
                "antenna_index": int(index),
                "pulse_count": int(self.pulse_counts[index]),
                "first_pulse_s": float(times[0]),
                "last_pulse_s": float(times[-1]),
            })
        return out


def antenna_schedule(plan: DropPlan, layout: AntennaLayout, pulse_times) -> AntennaSchedule:
    """
    Assign each microwave pulse to the antenna beside the falling diamond.

    Position is z = g t^2 / 2 from release; antenna k covers [k L, (k+1) L).

    The layout only has to reach the positions the pulses occupy, not the
    whole drop height.

    Raises:
        InvalidInputError: If a pulse lies outside the window
        CoverageError: If a pulse position lies beyond the last antenna
    """
    times = np.asarray(pulse_times, dtype=float)
    if times.size and (times.min() < 0.0 or times.max() > plan.window):
        bad = int(np.flatnonzero((times < 0.0) | (times > plan.window))[0])
        raise InvalidInputError(f"antenna_schedule: pulse {bad} at {times[bad]} s lies outside the {plan.window} s window")
    if np.any(np.diff(times) < 0):
        raise InvalidInputError("antenna_schedule: pulse times must be non-decreasing")

    positions = 0.5 * CONSTANTS.g_earth * times ** 2
    indices = np.floor(positions / layout.length).astype(np.int64)
    beyond = np.flatnonzero(indices >= layout.count)
    if beyond.size:
        k = int(beyond[0])
        raise CoverageError(
            f"antenna_schedule: pulse {k} at t = {times[k]:.6f} s (z = {positions[k]:.4f} m) is beyond antenna coverage",
            pulse_index=k,
        )
    counts = np.bincount(indices, minlength=layout.count)
    changes = np.flatnonzero(np.diff(indices)) + 1
    switches = [(float(times[i]), int(indices[i - 1]), int(indices[i])) for i in changes]
    return AntennaSchedule(times, positions, indices, counts, switches)


@dataclass
class AcceptanceTrial:
    accepted: bool
    state: ProtocolState
    rejection: Optional[Rejection]
    orientation_counts: Tuple[int, ...]
    g2: Optional[float]


def _orientation_g2(counts: np.ndarray) -> float:
    # HBT is taken on the ODMR-selected orientation with the fewest emitters
    occupied = counts[counts > 0]
    return hbt_g2(int(occupied.min()))


def acceptance_trial(
    diamond: Diamond,
    rng: np.random.Generator,
    gates: Optional[GateConfig] = None,
    bias_field: float = 0.05,
    state: Optional[ProtocolState] = None,
) -> AcceptanceTrial:
    """
    Load one particle and push it through Trap, Spectrum, HBT and ODMR.

    The NV count is Poisson(diamond.expected_nv) split uniformly over the four
    orientations; the HBT measurement is orientation resolved, so a particle
    passes when some orientation holds exactly one NV. Instrument steps pass
    with the configured probabilities.

    Returns:
        AcceptanceTrial; on acceptance ``state`` sits at CoolPurge
    """
    gates = gates or GateConfig()
    state = state or ProtocolState()
    draws = rng.random(4)
    counts = sample_orientation_counts(diamond.expected_nv, rng, size=1)[0]
    total = int(counts.sum())
    g2 = _orientation_g2(counts) if total else None

    evidence_by_step = [
        {
            "mass_measured": bool(draws[0] < gates.pass_probability("mass_measurement")),
            "mass": diamond.mass,
            "charge_neutral": bool(draws[1] < gates.pass_probability("charge_neutralisation")),
        },
        {"nv_spectrum": bool(total > 0 and draws[2] < gates.pass_probability("fluorescence_spectrum"))},
        {"g2": g2 if g2 is not None else 1.0},
        {"aligned": bool(draws[3] < gates.pass_probability("odmr_alignment")), "bias_field": bias_field},
    ]
    for evidence in evidence_by_step:
        result = advance(state, evidence, gates)
        if isinstance(result, Rejection):
            return AcceptanceTrial(False, result.state, result, tuple(int(c) for c in counts), g2)
        state = result
    return AcceptanceTrial(True, state, None, tuple(int(c) for c in counts), g2)


@dataclass
class CampaignReport:
    seed: int
    particles_requested: int
    particles_accepted: int
    attempts: List[int]
    acceptance_probability: float
    rejections: Dict[str, int]
    aborted: bool = False
    failed_gate: Optional[str] = None
    timing: Optional[InterferometerTiming] = None
    phase: Optional[float] = None
    visibility: Optional[float] = None
    expected_collisions: Optional[float] = None
    dataset: Optional[FringeDataset] = None
    fit: Optional[FringeFit] = None
    flags: List[str] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    steps_completed: List[str] = field(default_factory=list)

    @property
    def mean_attempts(self) -> float:
        return float(np.mean(self.attempts)) if self.attempts else math.inf

    @property
    def expected_attempts(self) -> float:
        return 1.0 / self.acceptance_probability if self.acceptance_probability > 0 else math.inf

    @property
    def total_attempts(self) -> int:
        return int(sum(self.attempts))

    @property
    def total_drops(self) -> int:
        return self.dataset.total_drops if self.dataset is not None else 0


def _run_step(step: ProtocolStep, func: Callable[[], Any]) -> Any:
    try:
        return func()
    except MassiveError as e:
        raise ProtocolStepError(step.value, e) from e
    except ValueError as e:
        raise ProtocolStepError(step.value, InvalidInputError(str(e))) from e


def _scan_values(timing: InterferometerTiming, phase: float, points: int, fringes: float) -> np.ndarray:
    """Drop times around t3 spanning ``fringes`` periods of phi(T) = phi0 (T / t3)^3."""
    t0 = timing.t3
    slope = 3.0 * abs(phase) / t0
    half_span = 0.5 * fringes * 2.0 * math.pi / slope if slope > 0 else 1e-5 * t0
    return t0 + np.linspace(-half_span, half_span, points)


def run_campaign(scenario: "Scenario", workers: int = 1, gates: Optional[GateConfig] = None) -> CampaignReport:
    """
    Run a full drop campaign for a scenario.

    Particles are loaded and gated until the requested number is accepted;
    then the shared cooling, vacuum, closure and timing gates are checked
    once through the state machine, the fringe scan over drop time is
    simulated and fitted. Any gate failure after acceptance aborts the
    campaign with the failed gate recorded.

    Raises:
        ProtocolStepError: If a model raises inside a step
    """
    gates = gates or load_gate_config(scenario.campaign.gates_path)
    seed = scenario.run.seed
    diamond = _run_step(ProtocolStep.TRAP, scenario.diamond.build)
    env = scenario.magnetics.environment()
    plan = scenario.drop.plan()
    campaign = scenario.campaign

    report = CampaignReport(
        seed=seed,
        particles_requested=campaign.particles,
        particles_accepted=0,
        attempts=[],
        acceptance_probability=single_orientation_probability(diamond.expected_nv) * math.prod(
            gates.pass_probability(name) for name in
            ("mass_measurement", "charge_neutralisation", "fluorescence_spectrum", "odmr_alignment")
        ),
        rejections={},
        notes=[plan.window_note()],
    )

    rng = named_stream(seed, "protocol_engine", "acceptance")
    rejections: Counter = Counter()
    for _ in range(campaign.particles):
        state = ProtocolState()
        tries = 0
        while True:
            tries += 1
            trial = acceptance_trial(diamond, rng, gates, env.bias_field, state)
            if trial.accepted:
                break
            rejections[trial.rejection.gate] += 1
            state = trial.state
            if tries >= gates.max_attempts_per_particle:
                report.rejections = dict(sorted(rejections.items()))
                report.aborted = True
                report.failed_gate = "acceptance:max_attempts"
                log_with_context(
                    logger,
                    logging.ERROR,
                    "Protocol",
                    "Campaign aborted: no particle accepted",
                    {"attempts": tries, "expected_nv": diamond.expected_nv}
                )
                return report
        report.attempts.append(tries)
        report.particles_accepted += 1
    report.rejections = dict(sorted(rejections.items()))
    state = trial.state
    report.steps_completed = [s.value for s in list(ProtocolStep)[:4]]

    def gate(step: ProtocolStep, evidence: Mapping[str, Any]) -> bool:
        nonlocal state
        result = advance(state, evidence, gates)
        if isinstance(result, Rejection):
            report.aborted = True
            report.failed_gate = result.gate
            log_with_context(
                logger,
                logging.ERROR,
                "Protocol",
                "Campaign aborted at gate",
                {"gate": result.gate, "detail": result.detail}
            )
            return False
        state = result
        report.steps_completed.append(step.value)
        return True

    vacuum = scenario.vacuum
    cooling = _run_step(
        ProtocolStep.COOL_PURGE,
        lambda: cooling_report(diamond, vacuum.purge_gas(), vacuum.cooling_duration, scenario.diamond.initial_temperature),
    )
    internal_temperature = vacuum.temperature if cooling.cooled_ok else scenario.diamond.initial_temperature
    if not gate(ProtocolStep.COOL_PURGE, {
        "temperature": internal_temperature,
        "cooled_ok": cooling.cooled_ok,
        "pressure_schedule": [gates.pressure_schedule[0], vacuum.purge_pressure, vacuum.trap_pressure],
    }):
        return report
    if not gate(ProtocolStep.POLARIZE_DROP, {"polarized": True, "drop_pressure": vacuum.trap_pressure}):
        return report
    if not gate(ProtocolStep.SUPERPOSE, {"pulse_applied": True}):
        return report

    timing = _run_step(ProtocolStep.GRADIENT_FALL, scenario.interferometer.timing)
    report.timing = timing
    collisions = _run_step(
        ProtocolStep.GRADIENT_FALL,
        lambda: collision_expectation(vacuum.uhv_gas(), diamond.radius, timing.t3),
    )
    report.expected_collisions = collisions
    if not gate(ProtocolStep.GRADIENT_FALL, {"expected_collisions": collisions}):
        return report

    trajectory: ArmTrajectory = _run_step(ProtocolStep.CLOSE_AND_SLOW, lambda: _campaign_trajectory(scenario, diamond, timing))
    residual = abs(trajectory.closure_displacement) / max(trajectory.max_separation, 1e-300)
    jitter = scenario.jitter.spec()
    if not gate(ProtocolStep.CLOSE_AND_SLOW, {"closure_residual": residual, "timing_error": jitter.time * timing.t3}):
        return report

    phase = _run_step(
        ProtocolStep.CLOSE_AND_SLOW,
        lambda: gravitational_phase(trajectory, diamond, scenario.interferometer.tilt()),
    )
    visibility = _run_step(
        ProtocolStep.CLOSE_AND_SLOW,
        lambda: phase_jitter_visibility(phase, jitter, scenario.jitter.n_drops, seed, workers),
    )
    if campaign.collision_visibility_loss:
        visibility *= math.exp(-collisions)
    report.phase = phase
    report.visibility = visibility

    scan = _scan_values(timing, phase, campaign.scan_points, campaign.scan_fringes)
    dataset = _run_step(
        ProtocolStep.CATCH_READOUT,
        lambda: simulate_fringe_scan(
            lambda t: phase * (t / timing.t3) ** 3,
            visibility,
            scenario.readout.model(),
            scan,
            campaign.drops_per_point,
            seed,
        ),
    )
    report.dataset = dataset
    gate(ProtocolStep.CATCH_READOUT, {"readout_complete": True})
    gate(ProtocolStep.REPEAT_SCAN, {"scan_points": len(dataset)})
    report.fit = _run_step(ProtocolStep.REPEAT_SCAN, lambda: fit_fringes(dataset))
    gate(ProtocolStep.COHERENCE_AUDIT, {})
    report.flags = list(state.flags)
    if report.fit.degenerate:
        report.flags.append("degenerate_fringes")

    log_with_context(
        logger,
        logging.INFO,
        "Protocol",
        "Campaign finished",
        {
            "accepted": report.particles_accepted,
            "mean_attempts": report.mean_attempts,
            "phase_rad": phase,
            "visibility": visibility,
            "fitted_visibility": report.fit.visibility,
        }
    )
    return report


def _campaign_trajectory(scenario: "Scenario", diamond: Diamond, timing: InterferometerTiming) -> ArmTrajectory:
    section = scenario.interferometer
    gradient = downstream_gradient(scenario.magnetics.environment(), scenario.magnetics.pole_pieces())
    acceleration = arm_acceleration(diamond, gradient, scenario.spin.basis)
    dd_times = None
    if section.strict_dd_forces:
        dd_times = build_cpmg(scenario.spin.cpmg_pulses, timing.t3).decoupling_times
    return propagate_arms(acceleration, timing, section.samples, section.strict_dd_forces, dd_times)
