"""
Command line surface: budget, sweep, campaign, closure, sensitivity and
schedule commands over a scenario file.

Exit status is 0 when every gate passes, 1 when any gate fails or a
campaign aborts, and 2 for input errors (bad scenario, bad flags,
unresolvable sweep path).
"""
import argparse
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from tqdm import tqdm

from config.settings import get_settings
from config.threading import configure_threading
from massive.errors import (
    CoverageError,
    InvalidInputError,
    MassiveError,
    ProtocolStepError,
)
from massive.interferometer import (
    arm_acceleration,
    ballistic_separation,
    coherence_limited_separation,
    JitterSpec,
    expected_visibility,
    gravitational_phase,
    phase_jitter_visibility,
    propagate_arms,
    solve_closure,
)
from massive.logging_utils import RunContext, get_module_logger, log_with_context, setup_logging
from massive.magnetics import environment_report
from massive.particle_model import (
    QUOTED_SINGLE_ORIENTATION,
    SINGLE_ORIENTATION_GATE,
    single_orientation_probability,
)
from massive.physical_base import CONSTANTS, convert_pressure, mean_thermal_speed
from massive.protocol_engine import TOLERANCE_SLACK, antenna_schedule, load_gate_config, run_campaign
from massive.readout_stats import ReadoutModel, drops_required, fringe_dataset_to_csv
from massive.reporting import REPORT_FIELDS, ReportLine, csv_text, render_text, report_rows, write_csv
from massive.scenario import Scenario, SweepSpec, field_unit, load_scenario, parse_quantity, parse_sweep_values
from massive.spin_dynamics import (
    build_cpmg,
    free_induction_sequence,
    pi_pulse_duration,
    simulate_dephasing,
    total_pulse_time,
)
from massive.vacuum_thermal import (
    blackbody_gate,
    collision_expectation,
    cooling_report,
    graham_ratio,
    pressure_budget,
)
from utils.audit_logger import get_run_audit_logger

logger = get_module_logger(__name__)

EXIT_OK = 0
EXIT_GATE_FAILURE = 1
EXIT_INPUT_ERROR = 2

SWEEP_FIELDS = ["value", "separation_m", "max_separation_m", "phase_rad", "visibility", "drops_required"]
TRAJECTORY_FIELDS = ["time_s", "dz_m", "dv_mps"]
ANTENNA_FIELDS = ["antenna_index", "pulse_count", "first_pulse_s", "last_pulse_s"]


@dataclass
class CommandResult:
    title: str
    lines: List[ReportLine] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    # (fieldnames, rows) written to --output instead of the report lines
    table: Optional[Tuple[List[str], List[Dict[str, Any]]]] = None
    extra_outputs: Dict[str, Callable[[Path], Any]] = field(default_factory=dict)
    aborted: bool = False

    @property
    def failed_gates(self) -> List[str]:
        return [f"{line.module}.{line.name}" for line in self.lines if line.ok is False]

    @property
    def exit_code(self) -> int:
        return EXIT_GATE_FAILURE if self.aborted or self.failed_gates else EXIT_OK


def _mbar(pascal: float) -> float:
    return convert_pressure(pascal, "Pa", "mbar")


def core_figures(scenario: Scenario, seed: int, workers: int = 1) -> Dict[str, Any]:
    """Separation, phase, visibility and drop count shared by budget and sweep."""
    diamond = scenario.diamond.build()
    magnetics = scenario.magnetics
    env_report = environment_report(magnetics.environment(), magnetics.pole_pieces())
    acceleration = arm_acceleration(diamond, env_report.gradient, scenario.spin.basis)
    timing = scenario.interferometer.timing()
    trajectory = propagate_arms(
        acceleration,
        timing,
        scenario.interferometer.samples,
        scenario.interferometer.strict_dd_forces,
        build_cpmg(scenario.spin.cpmg_pulses, timing.t3).decoupling_times if scenario.interferometer.strict_dd_forces else None,
    )
    phase = gravitational_phase(trajectory, diamond, scenario.interferometer.tilt()) if trajectory.is_closed else math.nan
    jitter = scenario.jitter.spec()
    visibility = phase_jitter_visibility(phase, jitter, scenario.jitter.n_drops, seed, workers) if trajectory.is_closed else 0.0
    readout = scenario.readout.model()
    return {
        "diamond": diamond,
        "environment": env_report,
        "acceleration": acceleration,
        "timing": timing,
        "trajectory": trajectory,
        "separation": ballistic_separation(acceleration, 2.0 * timing.t1),
        "max_separation": trajectory.max_separation,
        "phase": phase,
        "expected_visibility": expected_visibility(phase, jitter) if trajectory.is_closed else 0.0,
        "visibility": visibility,
        "drops_required": drops_required(readout, scenario.readout.target_snr),
        "readout": readout,
    }


def command_budget(scenario: Scenario, workers: int = 1) -> CommandResult:
    """One-page design budget; each line names its module and gate verdict."""
    seed = scenario.run.seed
    gates = load_gate_config(scenario.campaign.gates_path)
    figures = core_figures(scenario, seed, workers)
    diamond = figures["diamond"]
    env = figures["environment"]
    timing = figures["timing"]
    trajectory = figures["trajectory"]
    plan = scenario.drop.plan()
    spin = scenario.spin
    vacuum = scenario.vacuum
    result = CommandResult(title="MASSIVE design budget", notes=[plan.window_note()])
    add = result.lines.append

    p_single = single_orientation_probability(diamond.expected_nv)
    add(ReportLine("particle_model", "mass", diamond.mass, "kg"))
    add(ReportLine("particle_model", "atom_count", diamond.atom_count))
    add(ReportLine("particle_model", "nitrogen_count", diamond.nitrogen_count))
    add(ReportLine("particle_model", "expected_nv", diamond.expected_nv))
    add(ReportLine("particle_model", "single_orientation_probability", p_single, ok=p_single > SINGLE_ORIENTATION_GATE,
                   note=f"quoted {QUOTED_SINGLE_ORIENTATION} at 6 NV; gate > {SINGLE_ORIENTATION_GATE}"))

    add(ReportLine("magnetics", "gradient", env.gradient, "T/m", note=env.gradient_model.value))
    add(ReportLine("magnetics", "saturation", env.saturation_ok, ok=env.saturation_ok))
    add(ReportLine("magnetics", "alignment_bias", scenario.magnetics.bias_field, "T", ok=env.alignment_ok))
    add(ReportLine("magnetics", "stability", scenario.magnetics.run_to_run_stability, ok=env.stability_ok))
    add(ReportLine("magnetics", "dipole_pair_gradient", env.model_gradients["pair_midpoint"], "T/m"))
    result.notes.extend(env.notes.values())

    visibility_ok = figures["expected_visibility"] >= 0.05
    timing_error = scenario.jitter.time * timing.t3
    add(ReportLine("interferometer", "acceleration", figures["acceleration"], "m/s^2"))
    add(ReportLine("interferometer", "separation", figures["separation"], "m", note=f"s = a t^2 / 2 at t = {2 * timing.t1:g} s"))
    add(ReportLine("interferometer", "max_separation", figures["max_separation"], "m"))
    add(ReportLine("interferometer", "t1", timing.t1, "s"))
    add(ReportLine("interferometer", "t2", timing.t2, "s"))
    add(ReportLine("interferometer", "t3", timing.t3, "s", ok=timing.t3 <= plan.window * (1.0 + TOLERANCE_SLACK)))
    add(ReportLine("interferometer", "closure", trajectory.is_closed, ok=trajectory.is_closed))
    add(ReportLine("interferometer", "phase", figures["phase"], "rad"))
    add(ReportLine("interferometer", "expected_visibility", figures["expected_visibility"], ok=visibility_ok,
                   note="" if visibility_ok else "pseudo-random phase"))
    add(ReportLine("interferometer", "jitter_visibility", figures["visibility"]))
    add(ReportLine("interferometer", "drop_time_control", timing_error, "s", ok=gates.timing_ok(timing_error)))
    add(ReportLine("interferometer", "coherence_limited_separation", coherence_limited_separation(figures["acceleration"], spin.coherence_time), "m",
                   note=f"T2 = {spin.coherence_time:g} s"))
    add(ReportLine("interferometer", "decoupled_separation", coherence_limited_separation(figures["acceleration"], spin.decoupled_coherence_time), "m",
                   note=f"T2 = {spin.decoupled_coherence_time:g} s"))
    add(ReportLine("interferometer", "free_fall_time", plan.fall_time, "s"))
    if not visibility_ok:
        log_with_context(
            logger,
            logging.WARNING,
            "Budget",
            "Phase scatter exceeds control: pseudo-random phase",
            {"phase_rad": figures["phase"], "expected_visibility": figures["expected_visibility"]}
        )

    sequence = build_cpmg(spin.cpmg_pulses, timing.t3)
    noise = spin.dephasing_noise(scenario.diamond.carbon12_purified, seed)
    free = free_induction_sequence(spin.coherence_time)
    decoupled = build_cpmg(spin.decoupling_pulses, spin.coherence_time)
    w_free = simulate_dephasing(free, noise, spin.dephasing_trials, min(noise.correlation_time / 10.0, free.min_gap() / 2.0), workers)
    w_dd = simulate_dephasing(decoupled, noise, spin.dephasing_trials, min(noise.correlation_time / 10.0, decoupled.min_gap() / 2.0), workers)
    standoff = scenario.drop.antenna_standoff
    add(ReportLine("spin_dynamics", "pi_pulse_duration", pi_pulse_duration(spin.microwave_power, standoff), "s"))
    add(ReportLine("spin_dynamics", "microwave_on_time", total_pulse_time(sequence, spin.microwave_power, standoff), "s"))
    add(ReportLine("spin_dynamics", "coherence_free", w_free))
    add(ReportLine("spin_dynamics", f"coherence_cpmg_{spin.decoupling_pulses}", w_dd, ok=w_dd > w_free))

    budget = pressure_budget(vacuum.trap_pressure, vacuum.r_trap, vacuum.r_uhv, diamond.radius, timing.t3, vacuum.temperature)
    uhv = vacuum.uhv_pressure_value()
    collisions = collision_expectation(vacuum.uhv_gas(), diamond.radius, timing.t3)
    cooling = cooling_report(diamond, vacuum.purge_gas(), vacuum.cooling_duration, scenario.diamond.initial_temperature)
    add(ReportLine("vacuum_thermal", "helium_mean_speed", mean_thermal_speed(vacuum.temperature), "m/s"))
    add(ReportLine("vacuum_thermal", "trap_pressure", _mbar(vacuum.trap_pressure), "mbar"))
    add(ReportLine("vacuum_thermal", "uhv_pressure", _mbar(uhv), "mbar"))
    add(ReportLine("vacuum_thermal", "pressure_ratio", budget.pressure_ratio))
    add(ReportLine("vacuum_thermal", "expected_collisions", collisions, ok=collisions < 1.0))
    add(ReportLine("vacuum_thermal", "required_uhv_pressure", _mbar(budget.required_uhv_pressure), "mbar", note="one expected collision"))
    add(ReportLine("vacuum_thermal", "molecular_flow", budget.molecular_flow_ok, ok=budget.molecular_flow_ok))
    add(ReportLine("vacuum_thermal", "residual_gas_effusion_ratio",
                   graham_ratio(vacuum.residual_molar_mass, CONSTANTS.helium_molar_mass), note="relative to helium"))
    add(ReportLine("vacuum_thermal", "impinged_helium_mass", cooling.impinged_mass, "kg", note=f"at {_mbar(vacuum.purge_pressure):g} mbar"))
    for label, mass in cooling.reference_masses.items():
        add(ReportLine("vacuum_thermal", f"impinged_helium_mass_{label.replace(' ', '_')}", mass, "kg"))
    add(ReportLine("vacuum_thermal", "helium_heat_capacity", cooling.helium_heat_capacity, "J/K"))
    add(ReportLine("vacuum_thermal", "diamond_heat_capacity", cooling.diamond_heat_capacity, "J/K"))
    add(ReportLine("vacuum_thermal", "cooled", cooling.cooled_ok, ok=cooling.cooled_ok))
    add(ReportLine("vacuum_thermal", "blackbody", vacuum.temperature, "K", ok=blackbody_gate(vacuum.temperature)))
    result.notes.extend(cooling.assumptions.values())

    try:
        schedule = antenna_schedule(plan, scenario.drop.layout(), build_cpmg(spin.cpmg_pulses, plan.window).times)
        add(ReportLine("protocol_engine", "antenna_max_index", schedule.max_index, ok=True,
                       note=f"{schedule.antennas_used} of {scenario.drop.antenna_count} antennas fire"))
    except CoverageError as e:
        add(ReportLine("protocol_engine", "antenna_max_index", -1, ok=False, note=str(e)))

    readout: ReadoutModel = figures["readout"]
    room = drops_required(ReadoutModel.room(scenario.readout.single_shot_snr), scenario.readout.target_snr)
    add(ReportLine("readout_stats", "single_shot_snr", readout.effective_snr, note=readout.kind.value))
    add(ReportLine("readout_stats", "drops_required", figures["drops_required"], note=f"SNR {scenario.readout.target_snr:g}"))
    add(ReportLine("readout_stats", "drops_required_room", room))
    add(ReportLine("readout_stats", "reduction_factor", room / figures["drops_required"]))
    return result


def _sweep_point(scenario: Scenario, sweep: SweepSpec, index: int, value: float, workers: int) -> Dict[str, Any]:
    point = sweep.apply(scenario, value)
    seed = sweep.point_seed(scenario.run.seed, index)
    figures = core_figures(point, seed, workers)
    return {
        "value": value,
        "separation_m": figures["separation"],
        "max_separation_m": figures["max_separation"],
        "phase_rad": figures["phase"],
        "visibility": figures["visibility"],
        "drops_required": figures["drops_required"],
    }


def command_sweep(scenario: Scenario, sweep: SweepSpec, sweep_workers: int = 1, workers: int = 1) -> CommandResult:
    """
    Evaluate the core figures at every sweep point.

    Points may run concurrently; rows always come back in sweep order.
    """
    sweep.split_path()
    points = sweep.points()
    result = CommandResult(title=f"Sweep over {sweep.parameter}")
    configure_threading(sweep_workers)
    with tqdm(total=len(points), desc=f"sweep {sweep.parameter}", disable=len(points) < 2, file=sys.stderr) as progress:
        def run(item):
            index, value = item
            row = _sweep_point(scenario, sweep, index, value, workers)
            progress.update(1)
            return row
        if sweep_workers > 1:
            with ThreadPoolExecutor(max_workers=sweep_workers) as pool:
                rows = list(pool.map(run, enumerate(points)))
        else:
            rows = [run(item) for item in enumerate(points)]
    result.table = (SWEEP_FIELDS, rows)
    for row in rows:
        result.lines.append(ReportLine(
            "toolkit_cli",
            f"{sweep.parameter}={row['value']:.6g}",
            row["visibility"],
            note=f"separation {row['separation_m']:.4g} m, phase {row['phase_rad']:.4g} rad, drops {row['drops_required']}",
        ))
    return result


def command_campaign(scenario: Scenario, workers: int = 1) -> CommandResult:
    report = run_campaign(scenario, workers)
    result = CommandResult(title="MASSIVE drop campaign", notes=list(report.notes), aborted=report.aborted)
    add = result.lines.append
    add(ReportLine("protocol_engine", "particles_accepted", report.particles_accepted,
                   ok=report.particles_accepted == report.particles_requested))
    add(ReportLine("protocol_engine", "mean_attempts", report.mean_attempts))
    add(ReportLine("protocol_engine", "expected_attempts", report.expected_attempts))
    add(ReportLine("protocol_engine", "total_attempts", report.total_attempts))
    for gate, count in report.rejections.items():
        add(ReportLine("protocol_engine", f"rejections[{gate}]", count))
    add(ReportLine("protocol_engine", "campaign", "aborted" if report.aborted else "complete",
                   ok=not report.aborted, note=report.failed_gate or ""))
    if report.expected_collisions is not None:
        add(ReportLine("vacuum_thermal", "expected_collisions", report.expected_collisions))
    if report.timing is not None:
        t = report.timing
        add(ReportLine("interferometer", "timing", f"({t.t1:.6g}, {t.t2:.6g}, {t.t3:.6g})", "s"))
    if report.phase is not None:
        add(ReportLine("interferometer", "phase", report.phase, "rad"))
        add(ReportLine("interferometer", "visibility", report.visibility))
    if report.fit is not None:
        fit = report.fit
        add(ReportLine("readout_stats", "fitted_visibility", fit.visibility, note=f"+/- {fit.visibility_error:.3g} (1 sigma)"))
        add(ReportLine("readout_stats", "visibility_ci_low", fit.visibility - 1.96 * fit.visibility_error))
        add(ReportLine("readout_stats", "visibility_ci_high", fit.visibility + 1.96 * fit.visibility_error))
        add(ReportLine("readout_stats", "phase_offset", fit.phase_offset, "rad", note=f"+/- {fit.phase_offset_error:.3g}"))
        add(ReportLine("readout_stats", "fringe_frequency", fit.frequency, "rad/s"))
        add(ReportLine("readout_stats", "chi_square_per_dof", fit.chi_square / fit.dof))
        add(ReportLine("readout_stats", "total_drops", report.total_drops))
    for flag in report.flags:
        add(ReportLine("protocol_engine", "flag", flag, ok=False))
    if report.dataset is not None:
        dataset = report.dataset
        precision = get_settings().csv_precision
        result.extra_outputs["fringes"] = lambda path: fringe_dataset_to_csv(dataset, path, precision)
    return result


def command_closure(scenario: Scenario, t1: Optional[float] = None) -> CommandResult:
    t1 = scenario.interferometer.t1 if t1 is None else t1
    timing = solve_closure(t1)
    diamond = scenario.diamond.build()
    env = environment_report(scenario.magnetics.environment(), scenario.magnetics.pole_pieces())
    acceleration = arm_acceleration(diamond, env.gradient, scenario.spin.basis)
    trajectory = propagate_arms(acceleration, timing, scenario.interferometer.samples)
    result = CommandResult(title="Interferometer closure")
    add = result.lines.append
    add(ReportLine("interferometer", "timing", f"({timing.t1:.6g}, {timing.t2:.6g}, {timing.t3:.6g})", "s"))
    add(ReportLine("interferometer", "t2_over_t1", timing.t2 / timing.t1))
    add(ReportLine("interferometer", "t3_over_t1", timing.t3 / timing.t1))
    add(ReportLine("interferometer", "closure_displacement", trajectory.closure_displacement, "m"))
    add(ReportLine("interferometer", "closure_velocity", trajectory.closure_velocity, "m/s"))
    add(ReportLine("interferometer", "max_separation", trajectory.max_separation, "m"))
    add(ReportLine("interferometer", "closed", trajectory.is_closed, ok=trajectory.is_closed))
    rows = [
        {"time_s": float(t), "dz_m": float(z), "dv_mps": float(v)}
        for t, z, v in zip(trajectory.times, trajectory.relative_displacement, trajectory.relative_velocity)
    ]
    result.table = (TRAJECTORY_FIELDS, rows)
    return result


def command_sensitivity(scenario: Scenario, workers: int = 1) -> CommandResult:
    figures = core_figures(scenario, scenario.run.seed, workers)
    phase = figures["phase"]
    jitter = scenario.jitter.spec()
    result = CommandResult(title="Phase sensitivity")
    add = result.lines.append
    add(ReportLine("interferometer", "phase", phase, "rad"))
    add(ReportLine("interferometer", "jitter_visibility", figures["visibility"], ok=figures["visibility"] >= 0.05))
    add(ReportLine("interferometer", "expected_visibility", figures["expected_visibility"]))
    for name in ("time", "gradient", "g_factor"):
        only = JitterSpec(**{key: (getattr(jitter, key) if key == name else 0.0) for key in ("time", "gradient", "g_factor")})
        add(ReportLine("interferometer", f"visibility_{name}_only", expected_visibility(phase, only),
                       note=f"epsilon = {getattr(jitter, name):.3g}"))
    if math.isfinite(phase) and phase != 0.0:
        # V = 1/2 when (3 phi eps_t)^2 / 2 = ln 2
        add(ReportLine("interferometer", "time_tolerance_half_visibility", math.sqrt(2.0 * math.log(2.0)) / (3.0 * abs(phase))))
    return result


def command_schedule(scenario: Scenario) -> CommandResult:
    plan = scenario.drop.plan()
    layout = scenario.drop.layout()
    spin = scenario.spin
    sequence = build_cpmg(spin.cpmg_pulses, plan.window)
    schedule = antenna_schedule(plan, layout, sequence.times)
    result = CommandResult(title="Microwave antenna schedule", notes=[plan.window_note()])
    add = result.lines.append
    add(ReportLine("protocol_engine", "pulses", len(sequence.pulses)))
    add(ReportLine("protocol_engine", "last_pulse_position", float(schedule.positions[-1]), "m"))
    add(ReportLine("protocol_engine", "antenna_max_index", schedule.max_index, ok=schedule.max_index < layout.count))
    add(ReportLine("protocol_engine", "antennas_used", schedule.antennas_used))
    add(ReportLine("protocol_engine", "switch_overs", len(schedule.switch_times)))
    add(ReportLine("spin_dynamics", "pi_pulse_duration", pi_pulse_duration(spin.microwave_power, layout.standoff), "s"))
    add(ReportLine("spin_dynamics", "microwave_on_time", total_pulse_time(sequence, spin.microwave_power, layout.standoff), "s"))
    result.table = (ANTENNA_FIELDS, schedule.rows())
    return result


def _common_arguments() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="Scenario file (defaults to the built-in parameter set)")
    common.add_argument("--output", help="Write CSV output to this path")
    common.add_argument("--seed", type=int, help="Override the scenario seed")
    common.add_argument("--format", choices=["text", "csv"], default="text", help="Stdout format")
    common.add_argument("--log-level", help="Override MASSIVE_LOG_LEVEL")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_arguments()
    parser = argparse.ArgumentParser(prog="massive", description="MASSIVE drop-interferometry design toolkit")
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("budget", parents=[common], help="One-page design budget")
    sweep = commands.add_parser("sweep", parents=[common], help="Sweep one scenario field")
    sweep.add_argument("--param", required=True, help="section.key, e.g. diamond.radius")
    source = sweep.add_mutually_exclusive_group(required=True)
    source.add_argument("--values", help="Comma-separated values, SI suffixes allowed")
    source.add_argument("--grid", help="min,max,count")
    sweep.add_argument("--seed-policy", choices=["shared", "per_point"], default="shared")
    commands.add_parser("campaign", parents=[common], help="Simulate a full drop campaign")
    closure = commands.add_parser("closure", parents=[common], help="Solve interferometer closure")
    closure.add_argument("--t1", help="First flip time (SI suffix allowed)")
    commands.add_parser("sensitivity", parents=[common], help="Phase-jitter sensitivity")
    commands.add_parser("schedule", parents=[common], help="Antenna plan and pulse sizing")
    return parser


def _build_sweep(args: argparse.Namespace) -> SweepSpec:
    path_spec = SweepSpec(parameter=args.param, values=[0.0])
    section, key = path_spec.split_path()
    unit = field_unit(section, key)
    if args.values is not None:
        return SweepSpec(parameter=args.param, values=parse_sweep_values(args.values, unit), seed_policy=args.seed_policy)
    parts = [p for p in args.grid.split(",") if p.strip()]
    if len(parts) != 3:
        raise InvalidInputError(f"sweep: --grid needs min,max,count, got {args.grid!r}")
    count = parse_quantity(parts[2], None)
    if not count.is_integer() or count < 1:
        raise InvalidInputError(f"sweep: grid count must be a positive integer, got {parts[2]!r}")
    return SweepSpec(
        parameter=args.param,
        grid=(parse_quantity(parts[0], unit), parse_quantity(parts[1], unit), int(count)),
        seed_policy=args.seed_policy,
    )


def _dispatch(args: argparse.Namespace, scenario: Scenario, settings) -> CommandResult:
    workers = settings.monte_carlo_workers
    configure_threading(workers)
    if args.command == "budget":
        return command_budget(scenario, workers)
    if args.command == "sweep":
        return command_sweep(scenario, _build_sweep(args), settings.sweep_workers, workers)
    if args.command == "campaign":
        return command_campaign(scenario, workers)
    if args.command == "closure":
        t1 = parse_quantity(args.t1, "s") if args.t1 is not None else None
        return command_closure(scenario, t1)
    if args.command == "sensitivity":
        return command_sensitivity(scenario, workers)
    return command_schedule(scenario)


def _emit(result: CommandResult, args: argparse.Namespace, precision: int) -> None:
    if args.format == "csv":
        if result.table is not None:
            sys.stdout.write(csv_text(result.table[0], result.table[1], precision))
        else:
            sys.stdout.write(csv_text(REPORT_FIELDS, report_rows(result.lines), precision))
    else:
        sys.stdout.write(render_text(result.title, result.lines, result.notes))
    if args.output:
        output = Path(args.output)
        if result.table is not None:
            write_csv(output, result.table[0], result.table[1], precision)
        else:
            write_csv(output, REPORT_FIELDS, report_rows(result.lines), precision)
        for name, writer in result.extra_outputs.items():
            writer(output.with_name(f"{output.stem}_{name}{output.suffix or '.csv'}"))


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Entry point for ``python -m massive``.

    Returns:
        Process exit code (0 ok, 1 gate failure, 2 input error)
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_INPUT_ERROR

    settings = get_settings()
    level_name = (args.log_level or settings.log_level).upper()
    setup_logging(getattr(logging, level_name, logging.INFO))

    audit = get_run_audit_logger(settings.audit_log_dir, settings.environment)
    started = time.perf_counter()
    exit_code = EXIT_INPUT_ERROR
    failed: List[str] = []
    error_message: Optional[str] = None
    scenario: Optional[Scenario] = None
    context = RunContext()
    try:
        scenario = load_scenario(args.scenario)
        seed = args.seed if args.seed is not None else (
            scenario.run.seed if args.scenario else settings.default_seed
        )
        scenario = scenario.with_seed(seed)
        context = RunContext(seed=seed)
        with context:
            result = _dispatch(args, scenario, settings)
            _emit(result, args, settings.csv_precision)
            failed = result.failed_gates
            exit_code = result.exit_code
            log_with_context(
                logger,
                logging.INFO if exit_code == EXIT_OK else logging.ERROR,
                "CLI",
                f"{args.command} finished",
                {"exit_code": exit_code, "failed_gates": failed}
            )
    except ProtocolStepError as e:
        error_message = str(e)
        exit_code = EXIT_INPUT_ERROR if e.is_input_error else EXIT_GATE_FAILURE
        print(f"error: {e}", file=sys.stderr)
    except InvalidInputError as e:
        error_message = str(e)
        exit_code = EXIT_INPUT_ERROR
        print(f"error: {e}", file=sys.stderr)
    except MassiveError as e:
        error_message = str(e)
        exit_code = EXIT_GATE_FAILURE
        print(f"error: {e}", file=sys.stderr)
    finally:
        if audit is not None and scenario is not None:
            record = audit.start_run(args.command, scenario.run.seed, scenario.digest(), context.run_id)
            record.exit_code = exit_code
            record.failed_gates = failed
            record.elapsed_ms = (time.perf_counter() - started) * 1000.0
            record.output_path = args.output
            record.error_message = error_message
            audit.complete_run(record)
    return exit_code
