"""
Scenario files: the per-run parameter record.

A scenario is plain text with ``[section]`` headers and ``key = value``
lines. Numbers accept SI suffixes (``0.5 um``, ``100 mbar``, ``4 us``);
unknown sections or keys, wrong-dimension suffixes and out-of-range values
are all reported together with their line numbers. Every default is the
reference design, so an empty file is a valid scenario.
"""
import hashlib
import re
from enum import Enum
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from massive.errors import InvalidInputError, ScenarioParseError, UnitMismatchError
from massive.interferometer import InterferometerTiming, JitterSpec, TiltSpec, solve_closure
from massive.magnetics import Arrangement, FieldEnvironment, GradientModel, PolePieceModel
from massive.particle_model import DEFAULT_NV_YIELD, Diamond, build_diamond
from massive.physical_base import CONSTANTS
from massive.protocol_engine import AntennaLayout, DropPlan
from massive.random_streams import seed_sequence
from massive.readout_stats import ReadoutKind, ReadoutModel
from massive.spin_dynamics import Basis, DephasingNoise, NoiseKind
from massive.vacuum_thermal import GasCondition, steady_uhv_pressure

DEFAULT_SEED = 20180801

# Accepted suffixes per dimension, as factors to the SI unit.
UNIT_SUFFIXES: Dict[str, Dict[str, float]] = {
    "m": {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6, "μm": 1e-6, "nm": 1e-9},
    "s": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "μs": 1e-6, "ns": 1e-9},
    "Pa": {"Pa": 1.0, "mbar": 100.0, "bar": 1e5, "atm": 101325.0},
    "K": {"K": 1.0, "mK": 1e-3},
    "T": {"T": 1.0, "mT": 1e-3},
    "T/m": {"T/m": 1.0},
    "W": {"W": 1.0, "mW": 1e-3},
    "kg/m^3": {"kg/m^3": 1.0, "kg/m3": 1.0, "g/cm^3": 1e3},
    "rad/s": {"rad/s": 1.0},
}

_NUMBER_RE = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*(\S*)$")
_SECTION_RE = re.compile(r"^\[\s*(\w+)\s*\]$")
_KEY_RE = re.compile(r"^(\w+)\s*=\s*(.*)$")


def _unit(unit: str) -> Dict[str, Any]:
    return {"unit": unit}


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, use_enum_values=False)


class DiamondSection(_Section):
    radius: float = Field(0.5e-6, gt=0, json_schema_extra=_unit("m"))
    density: float = Field(CONSTANTS.diamond_density_default, gt=0, json_schema_extra=_unit("kg/m^3"))
    nitrogen_ppb: float = Field(20.0, ge=0)
    nv_yield: float = Field(DEFAULT_NV_YIELD, ge=0, le=1)
    carbon12_purified: bool = False
    initial_temperature: float = Field(300.0, gt=0, json_schema_extra=_unit("K"))

    def build(self) -> Diamond:
        return build_diamond(self.radius, self.density, self.nitrogen_ppb, self.nv_yield)


class MagneticsSection(_Section):
    bias_field: float = Field(0.05, ge=0, json_schema_extra=_unit("T"))
    gradient: float = Field(1e4, ge=0, json_schema_extra=_unit("T/m"))
    gradient_model: GradientModel = GradientModel.CONFIGURED_CONSTANT
    run_to_run_stability: float = Field(1e-9, ge=0)
    tip_radius: float = Field(20e-6, gt=0, json_schema_extra=_unit("m"))
    surface_field: float = Field(2.4, gt=0, json_schema_extra=_unit("T"))
    gap: float = Field(160e-6, gt=0, json_schema_extra=_unit("m"))
    arrangement: Arrangement = Arrangement.OPPOSING_PAIR

    def environment(self) -> FieldEnvironment:
        return FieldEnvironment(self.bias_field, self.gradient, self.gradient_model, self.run_to_run_stability)

    def pole_pieces(self) -> PolePieceModel:
        return PolePieceModel(self.tip_radius, self.surface_field, self.gap, self.arrangement)


class SpinSection(_Section):
    basis: Basis = Basis.SINGLE_QUANTUM
    cpmg_pulses: int = Field(10_000, ge=1)
    microwave_power: float = Field(10.0, gt=0, json_schema_extra=_unit("W"))
    coherence_time: float = Field(2e-3, gt=0, json_schema_extra=_unit("s"))
    decoupled_coherence_time: float = Field(0.5, gt=0, json_schema_extra=_unit("s"))
    noise_amplitude: Optional[float] = Field(None, ge=0, json_schema_extra=_unit("rad/s"))
    noise_correlation_time: float = Field(1e-3, gt=0, json_schema_extra=_unit("s"))
    decoupling_pulses: int = Field(32, ge=1)
    dephasing_trials: int = Field(400, ge=1)

    def dephasing_noise(self, carbon12_purified: bool, seed: int) -> DephasingNoise:
        """OU detuning noise; by default 1/T2, ten times weaker in 12C-purified material."""
        amplitude = self.noise_amplitude
        if amplitude is None:
            amplitude = (1.0 / self.coherence_time) / (10.0 if carbon12_purified else 1.0)
        return DephasingNoise(NoiseKind.ORNSTEIN_UHLENBECK, amplitude, self.noise_correlation_time, seed)


class InterferometerSection(_Section):
    t1: float = Field(0.1, gt=0, json_schema_extra=_unit("s"))
    t2: Optional[float] = Field(None, gt=0, json_schema_extra=_unit("s"))
    t3: Optional[float] = Field(None, gt=0, json_schema_extra=_unit("s"))
    cos_theta: float = Field(1e-9, ge=-1, le=1)
    tilt_offset: Optional[float] = Field(None, json_schema_extra=_unit("m"))
    tilt_arm: float = Field(1.0, gt=0, json_schema_extra=_unit("m"))
    samples: int = Field(10_001, ge=100)
    strict_dd_forces: bool = False

    @model_validator(mode="after")
    def _consistent_timing_and_tilt(self) -> "InterferometerSection":
        if (self.t2 is None) != (self.t3 is None):
            raise ValueError("t2 and t3 must be given together (or both omitted to solve closure)")
        if self.t2 is not None:
            InterferometerTiming(self.t1, self.t2, self.t3)
        if self.tilt_offset is not None:
            self.tilt()
        return self

    def timing(self) -> InterferometerTiming:
        if self.t2 is None:
            return solve_closure(self.t1)
        return InterferometerTiming(self.t1, self.t2, self.t3)

    def tilt(self) -> TiltSpec:
        """A measured arm offset, when given, takes precedence over cos_theta."""
        if self.tilt_offset is not None:
            return TiltSpec.from_arm_offset(self.tilt_offset, self.tilt_arm)
        return TiltSpec(self.cos_theta)


class VacuumSection(_Section):
    temperature: float = Field(5.0, gt=0, json_schema_extra=_unit("K"))
    purge_pressure: float = Field(1e4, ge=0, json_schema_extra=_unit("Pa"))
    cooling_duration: float = Field(0.1, ge=0, json_schema_extra=_unit("s"))
    trap_pressure: float = Field(7e-6, ge=0, json_schema_extra=_unit("Pa"))
    uhv_pressure: Optional[float] = Field(None, ge=0, json_schema_extra=_unit("Pa"))
    r_trap: float = Field(25e-6, gt=0, json_schema_extra=_unit("m"))
    r_uhv: float = Field(0.08, gt=0, json_schema_extra=_unit("m"))
    residual_molar_mass: float = Field(28.0e-3, gt=0)  # kg/mol, N2 background

    def purge_gas(self) -> GasCondition:
        return GasCondition(self.purge_pressure, self.temperature)

    def uhv_pressure_value(self) -> float:
        """Configured UHV pressure, or the effusion steady state behind the trap."""
        if self.uhv_pressure is not None:
            return self.uhv_pressure
        return steady_uhv_pressure(self.trap_pressure, self.r_trap, self.r_uhv)

    def uhv_gas(self) -> GasCondition:
        return GasCondition(self.uhv_pressure_value(), self.temperature)


class ReadoutSection(_Section):
    kind: ReadoutKind = ReadoutKind.CRYOGENIC_SINGLE_SHOT
    single_shot_snr: float = Field(0.03, gt=0)
    fidelity: float = Field(0.95, gt=0.5, le=1)
    target_snr: float = Field(10.0, gt=0)
    snr_cap: float = Field(100.0, gt=0)

    def model(self) -> ReadoutModel:
        return ReadoutModel(self.kind, self.single_shot_snr, self.fidelity, self.snr_cap)


class JitterSection(_Section):
    time: float = Field(1e-5, ge=0)
    gradient: float = Field(1e-9, ge=0)
    g_factor: float = Field(0.0, ge=0)
    n_drops: int = Field(2000, ge=100)

    def spec(self) -> JitterSpec:
        return JitterSpec(self.time, self.gradient, self.g_factor)


class DropSection(_Section):
    height: float = Field(1.5, gt=0, json_schema_extra=_unit("m"))
    window: float = Field(0.4, gt=0, json_schema_extra=_unit("s"))
    hole_radius: float = Field(25e-6, gt=0, json_schema_extra=_unit("m"))
    antenna_count: int = Field(150, ge=1)
    antenna_length: float = Field(0.01, gt=0, json_schema_extra=_unit("m"))
    antenna_standoff: float = Field(50e-6, gt=0, json_schema_extra=_unit("m"))

    @model_validator(mode="after")
    def _window_within_fall(self) -> "DropSection":
        self.plan()
        return self

    def plan(self) -> DropPlan:
        return DropPlan(self.height, self.window, self.hole_radius)

    def layout(self) -> AntennaLayout:
        return AntennaLayout(self.antenna_count, self.antenna_length, self.antenna_standoff)


class CampaignSection(_Section):
    particles: int = Field(100, ge=1)
    scan_points: int = Field(41, ge=8)
    drops_per_point: int = Field(500, ge=1)
    scan_fringes: float = Field(4.0, gt=0)
    collision_visibility_loss: bool = False
    gates_path: Optional[str] = None


class RunSection(_Section):
    seed: int = Field(DEFAULT_SEED, ge=0)


class Scenario(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    diamond: DiamondSection = DiamondSection()
    magnetics: MagneticsSection = MagneticsSection()
    spin: SpinSection = SpinSection()
    interferometer: InterferometerSection = InterferometerSection()
    vacuum: VacuumSection = VacuumSection()
    readout: ReadoutSection = ReadoutSection()
    jitter: JitterSection = JitterSection()
    drop: DropSection = DropSection()
    campaign: CampaignSection = CampaignSection()
    run: RunSection = RunSection()

    def with_seed(self, seed: int) -> "Scenario":
        return self.model_copy(update={"run": RunSection(seed=seed)})

    def digest(self) -> str:
        return hashlib.sha256(serialize_scenario(self).encode("utf-8")).hexdigest()[:16]


SECTIONS = {name: info.annotation for name, info in Scenario.model_fields.items()}


def field_unit(section: str, key: str) -> Optional[str]:
    extra = SECTIONS[section].model_fields[key].json_schema_extra or {}
    return extra.get("unit")


def _is_int_field(section: str, key: str) -> bool:
    return SECTIONS[section].model_fields[key].annotation is int


def parse_quantity(text: str, unit: Optional[str]) -> float:
    """
    Parse a number with an optional SI suffix into the field's SI unit.

    Raises:
        UnitMismatchError: If the suffix belongs to a different dimension
        InvalidInputError: If the number cannot be parsed
    """
    match = _NUMBER_RE.match(text.strip())
    if not match:
        raise InvalidInputError(f"cannot parse number {text.strip()!r}")
    value, suffix = float(match.group(1)), match.group(2)
    if not suffix:
        return value
    if unit is not None and suffix in UNIT_SUFFIXES.get(unit, {}):
        return value * UNIT_SUFFIXES[unit][suffix]
    for dimension, suffixes in UNIT_SUFFIXES.items():
        if suffix in suffixes:
            expected = unit or "dimensionless"
            raise UnitMismatchError(f"unit {suffix!r} is a {dimension} unit, expected {expected}")
    raise InvalidInputError(f"unknown unit suffix {suffix!r}")


def _convert(section: str, key: str, text: str) -> Any:
    unit = field_unit(section, key)
    if unit is not None:
        return parse_quantity(text, unit)
    if _is_int_field(section, key):
        value = parse_quantity(text, None)
        if not float(value).is_integer():
            raise InvalidInputError(f"{key} must be an integer, got {text.strip()!r}")
        return int(value)
    return text.strip()


def _strip_comment(line: str) -> str:
    if line.lstrip().startswith(("#", ";")):
        return ""
    return re.split(r"\s#", line, maxsplit=1)[0].strip()


def parse_scenario(text: str) -> Scenario:
    """
    Parse scenario text into a validated Scenario.

    Raises:
        ScenarioParseError: Listing every offending line
    """
    errors: List[Tuple[int, str]] = []
    values: Dict[str, Dict[str, Any]] = {}
    key_lines: Dict[Tuple[str, str], int] = {}
    section_lines: Dict[str, int] = {}
    section: Optional[str] = None
    in_unknown_section = False

    for number, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        header = _SECTION_RE.match(line)
        if header:
            name = header.group(1)
            if name not in SECTIONS:
                errors.append((number, f"unknown section [{name}]"))
                section, in_unknown_section = None, True
                continue
            section, in_unknown_section = name, False
            section_lines.setdefault(name, number)
            values.setdefault(name, {})
            continue
        entry = _KEY_RE.match(line)
        if not entry:
            errors.append((number, f"expected 'key = value' or '[section]', got {line!r}"))
            continue
        key, value_text = entry.group(1), entry.group(2)
        if section is None:
            if not in_unknown_section:
                errors.append((number, f"key {key!r} outside any section"))
            continue
        if key not in SECTIONS[section].model_fields:
            errors.append((number, f"unknown key {key!r} in [{section}]"))
            continue
        if (section, key) in key_lines:
            errors.append((number, f"duplicate key {key!r} in [{section}] (first on line {key_lines[(section, key)]})"))
            continue
        key_lines[(section, key)] = number
        try:
            values[section][key] = _convert(section, key, value_text)
        except InvalidInputError as e:
            errors.append((number, f"{section}.{key}: {e}"))

    built: Dict[str, BaseModel] = {}
    for name, fields in values.items():
        try:
            built[name] = SECTIONS[name].model_validate(fields)
        except ValidationError as e:
            for err in e.errors():
                loc = err.get("loc") or ()
                key = loc[0] if loc else None
                line = key_lines.get((name, key), section_lines.get(name, 0))
                where = f"{name}.{key}" if key else f"[{name}]"
                errors.append((line, f"{where}: {err['msg']}"))

    if errors:
        raise ScenarioParseError(sorted(errors))
    return Scenario(**built)


def _format_entry(value: Any, unit: Optional[str]) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, float):
        return f"{value!r} {unit}" if unit else repr(value)
    return str(value)


def serialize_scenario(scenario: Scenario) -> str:
    """Render a scenario in the text format; parse_scenario inverts it exactly."""
    lines: List[str] = []
    for name in SECTIONS:
        section = getattr(scenario, name)
        lines.append(f"[{name}]")
        for key in type(section).model_fields:
            value = getattr(section, key)
            if value is None:
                continue
            lines.append(f"{key} = {_format_entry(value, field_unit(name, key))}")
        lines.append("")
    return "\n".join(lines)


def load_scenario(path: Optional[str]) -> Scenario:
    """Parse a scenario file; no path means the default scenario."""
    if path is None:
        return Scenario()
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise InvalidInputError(f"cannot read scenario {path}: {e}")
    return parse_scenario(text)


class SweepSpec(BaseModel):
    """A scalar scenario field swept over explicit values or a linear grid."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    parameter: str
    values: Optional[List[float]] = None
    grid: Optional[Tuple[float, float, int]] = None
    seed_policy: Literal["shared", "per_point"] = "shared"

    @model_validator(mode="after")
    def _one_source(self) -> "SweepSpec":
        if (self.values is None) == (self.grid is None):
            raise ValueError("give exactly one of values or grid")
        if self.grid is not None and self.grid[2] < 1:
            raise ValueError("grid count must be >= 1")
        if self.values is not None and not self.values:
            raise ValueError("values must not be empty")
        return self

    def points(self) -> List[float]:
        if self.values is not None:
            return list(self.values)
        low, high, count = self.grid
        return [float(v) for v in np.linspace(low, high, int(count))]

    def split_path(self) -> Tuple[str, str]:
        """
        Raises:
            InvalidInputError: If the path is not section.key naming a scalar numeric field
        """
        parts = self.parameter.split(".")
        if len(parts) != 2 or parts[0] not in SECTIONS or parts[1] not in SECTIONS[parts[0]].model_fields:
            raise InvalidInputError(f"sweep: parameter path {self.parameter!r} does not resolve to a scenario field")
        section, key = parts
        annotation = SECTIONS[section].model_fields[key].annotation
        if annotation not in (float, int, Optional[float]):
            raise InvalidInputError(f"sweep: {self.parameter!r} is not a scalar numeric field")
        return section, key

    def apply(self, scenario: Scenario, value: float) -> Scenario:
        """Scenario with the swept field replaced, re-validated by its section model."""
        section, key = self.split_path()
        current = getattr(scenario, section)
        if _is_int_field(section, key):
            if not float(value).is_integer():
                raise InvalidInputError(f"sweep: {self.parameter} needs integer values, got {value}")
            value = int(value)
        try:
            updated = type(current).model_validate({**current.model_dump(), key: value})
        except ValidationError as e:
            raise InvalidInputError(f"sweep: {self.parameter} = {value}: {e.errors()[0]['msg']}")
        return scenario.model_copy(update={section: updated})

    def point_seed(self, base_seed: int, index: int) -> int:
        if self.seed_policy == "shared":
            return base_seed
        return int(seed_sequence(base_seed, "toolkit_cli", f"sweep/{index}").generate_state(1)[0])


def parse_sweep_values(text: str, unit: Optional[str]) -> List[float]:
    """Comma-separated values, each with an optional SI suffix."""
    items = [item for item in text.split(",") if item.strip()]
    if not items:
        raise InvalidInputError("sweep: no values given")
    return [parse_quantity(item, unit) for item in items]
