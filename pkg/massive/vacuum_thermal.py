"""
Kinetic-theory models for helium cooling, differential pumping and the
gas-collision decoherence budget.

All flows are treated as molecular (effusive). The Knudsen number over the
relevant aperture is computed alongside so callers can see when that
assumption breaks; nothing switches to a viscous model.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict

from massive.errors import InvalidInputError
from massive.logging_utils import get_module_logger, log_with_context
from massive.particle_model import Diamond, debye_heat_capacity
from massive.physical_base import (
    CONSTANTS,
    atom_mass,
    convert_pressure,
    mean_thermal_speed,
    molar_density,
    number_density,
)
from massive.validation import validate_non_negative, validate_positive

logger = get_module_logger(__name__)

COOLING_CAPACITY_RATIO = 100.0
BLACKBODY_THRESHOLD = 10.0       # K
DEFAULT_INITIAL_TEMPERATURE = 300.0
PURGE_PRESSURE = 1e4             # Pa, the 100 mbar purge of the cooling step
ATMOSPHERE = 101325.0            # Pa


@dataclass(frozen=True)
class GasCondition:
    pressure: float
    temperature: float = 5.0
    molar_mass: float = CONSTANTS.helium_molar_mass

    def __post_init__(self):
        validate_non_negative(self.pressure, "pressure", "GasCondition")
        validate_positive(self.temperature, "temperature", "GasCondition")
        validate_positive(self.molar_mass, "molar_mass", "GasCondition")

    @property
    def number_density(self) -> float:
        return number_density(self.pressure, self.temperature)

    @property
    def mean_speed(self) -> float:
        return mean_thermal_speed(self.temperature, self.molar_mass)

    def with_pressure(self, pressure: float) -> "GasCondition":
        return GasCondition(pressure, self.temperature, self.molar_mass)


@dataclass(frozen=True)
class Aperture:
    radius: float

    def __post_init__(self):
        validate_positive(self.radius, "radius", "Aperture")

    @property
    def area(self) -> float:
        return math.pi * self.radius ** 2

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius


def mean_free_path(gas: GasCondition, molecular_diameter: float = CONSTANTS.helium_kinetic_diameter) -> float:
    """k_B T / (sqrt(2) pi d^2 P); infinite in perfect vacuum."""
    molecular_diameter = validate_positive(molecular_diameter, "molecular_diameter", "mean_free_path")
    if gas.pressure == 0:
        return math.inf
    return CONSTANTS.boltzmann * gas.temperature / (math.sqrt(2.0) * math.pi * molecular_diameter ** 2 * gas.pressure)


def knudsen_number(gas: GasCondition, ap: Aperture) -> float:
    """Mean free path over the aperture diameter."""
    return mean_free_path(gas) / ap.diameter


def molecular_flow_ok(gas: GasCondition, ap: Aperture) -> bool:
    return knudsen_number(gas, ap) > 1.0


def effusion_flux(gas: GasCondition, ap: Aperture) -> float:
    """
    Molar effusion flux J = n v A / 4 through a thin orifice, mol/s.

    A WARNING is logged when the gas is not in molecular flow over the
    aperture; the value is still the effusive one.
    """
    if gas.pressure > 0 and not molecular_flow_ok(gas, ap):
        log_with_context(
            logger,
            logging.WARNING,
            "Vacuum",
            "Effusion formula used outside molecular flow",
            {"pressure_pa": gas.pressure, "knudsen": knudsen_number(gas, ap), "aperture_m": ap.radius}
        )
    return molar_density(gas.pressure, gas.temperature) * gas.mean_speed * ap.area / 4.0


def steady_uhv_pressure(trap_pressure: float, r_trap: float, r_uhv: float) -> float:
    """Flux balance P_trap r_trap^2 = P_uhv r_uhv^2 at common temperature, Pa."""
    trap_pressure = validate_non_negative(trap_pressure, "trap_pressure", "steady_uhv_pressure")
    r_trap = validate_positive(r_trap, "r_trap", "steady_uhv_pressure")
    r_uhv = validate_positive(r_uhv, "r_uhv", "steady_uhv_pressure")
    return trap_pressure * (r_trap / r_uhv) ** 2


def graham_ratio(molar_mass_1: float, molar_mass_2: float) -> float:
    """Effusion rate of species 1 relative to species 2, sqrt(M2/M1)."""
    molar_mass_1 = validate_positive(molar_mass_1, "molar_mass_1", "graham_ratio")
    molar_mass_2 = validate_positive(molar_mass_2, "molar_mass_2", "graham_ratio")
    return math.sqrt(molar_mass_2 / molar_mass_1)


def _impingement_rate(gas: GasCondition, particle_radius: float) -> float:
    # flux n v / 4 over the 4 pi r^2 surface of a sphere
    return gas.number_density * gas.mean_speed * math.pi * particle_radius ** 2


def impinging_gas_mass(gas: GasCondition, particle_radius: float, duration: float) -> float:
    """Total gas mass striking a sphere of the given radius in ``duration``, kg."""
    particle_radius = validate_positive(particle_radius, "particle_radius", "impinging_gas_mass")
    duration = validate_non_negative(duration, "duration", "impinging_gas_mass")
    return _impingement_rate(gas, particle_radius) * atom_mass(gas.molar_mass) * duration


def collision_expectation(gas: GasCondition, particle_radius: float, duration: float) -> float:
    """Expected number of gas collisions with the particle in ``duration``."""
    particle_radius = validate_positive(particle_radius, "particle_radius", "collision_expectation")
    duration = validate_non_negative(duration, "duration", "collision_expectation")
    return _impingement_rate(gas, particle_radius) * duration


def coherent_ok(expected_collisions: float) -> bool:
    """A single collision is taken to collapse the superposition."""
    return expected_collisions < 1.0


def required_pressure_for_collisions(
    target_collisions: float,
    particle_radius: float,
    duration: float,
    temperature: float = 5.0,
    molar_mass: float = CONSTANTS.helium_molar_mass,
) -> float:
    """Pressure at which the expected collision count equals the target, Pa."""
    target_collisions = validate_non_negative(target_collisions, "target_collisions", "required_pressure_for_collisions")
    particle_radius = validate_positive(particle_radius, "particle_radius", "required_pressure_for_collisions")
    duration = validate_positive(duration, "duration", "required_pressure_for_collisions")
    per_pascal = collision_expectation(GasCondition(1.0, temperature, molar_mass), particle_radius, duration)
    return target_collisions / per_pascal


def blackbody_gate(temperature: float, threshold: float = BLACKBODY_THRESHOLD) -> bool:
    """Internal temperature low enough that thermal emission is not a decoherence concern."""
    temperature = validate_positive(temperature, "temperature", "blackbody_gate")
    threshold = validate_positive(threshold, "threshold", "blackbody_gate")
    return temperature <= threshold


@dataclass
class CoolingReport:
    impinged_mass: float
    helium_heat_capacity: float
    diamond_heat_capacity: float
    capacity_ratio: float
    cooled_ok: bool
    initial_temperature: float
    duration: float
    gas_pressure: float
    reference_masses: Dict[str, float] = field(default_factory=dict)
    assumptions: Dict[str, str] = field(default_factory=dict)


def cooling_report(
    diamond: Diamond,
    gas: GasCondition,
    duration: float,
    initial_temperature: float = DEFAULT_INITIAL_TEMPERATURE,
    capacity_ratio_threshold: float = COOLING_CAPACITY_RATIO,
) -> CoolingReport:
    """
    Compare the heat capacity of the helium striking the diamond with the diamond's own.

    Args:
        diamond: The particle being cooled
        gas: Purge gas condition
        duration: Exposure time, s
        initial_temperature: Diamond temperature before cooling, K
        capacity_ratio_threshold: Required C_He / C_diamond for a cooled verdict

    Returns:
        CoolingReport; reference_masses also lists the 100 mbar and 1 atm cases
    """
    if not isinstance(diamond, Diamond):
        raise InvalidInputError("cooling_report: diamond must be a Diamond")
    duration = validate_non_negative(duration, "duration", "cooling_report")
    mass = impinging_gas_mass(gas, diamond.radius, duration)
    c_helium = 1.5 * CONSTANTS.gas_constant * mass / gas.molar_mass
    c_diamond = debye_heat_capacity(diamond, initial_temperature)
    ratio = c_helium / c_diamond
    references = {
        f"{convert_pressure(pressure, 'Pa', 'mbar'):g} mbar": impinging_gas_mass(gas.with_pressure(pressure), diamond.radius, duration)
        for pressure in (PURGE_PRESSURE, ATMOSPHERE)
    }
    report = CoolingReport(
        impinged_mass=mass,
        helium_heat_capacity=c_helium,
        diamond_heat_capacity=c_diamond,
        capacity_ratio=ratio,
        cooled_ok=ratio >= capacity_ratio_threshold,
        initial_temperature=initial_temperature,
        duration=duration,
        gas_pressure=gas.pressure,
        reference_masses=references,
        assumptions={"purge_pressure": "quoted helium mass read at the 100 mbar purge pressure"},
    )
    log_with_context(
        logger,
        logging.DEBUG,
        "Vacuum",
        "Cooling report",
        {"impinged_mass_kg": mass, "capacity_ratio": ratio, "cooled_ok": report.cooled_ok}
    )
    return report


@dataclass
class PressureBudget:
    trap_pressure: float
    uhv_pressure: float
    pressure_ratio: float
    expected_collisions: float
    coherent_ok: bool
    trap_knudsen: float
    uhv_knudsen: float
    required_uhv_pressure: float

    @property
    def molecular_flow_ok(self) -> bool:
        return self.trap_knudsen > 1.0 and self.uhv_knudsen > 1.0


def pressure_budget(
    trap_pressure: float,
    r_trap: float,
    r_uhv: float,
    particle_radius: float,
    duration: float,
    temperature: float = 5.0,
    molar_mass: float = CONSTANTS.helium_molar_mass,
) -> PressureBudget:
    """Trap and UHV pressures, their ratio and the collision budget over ``duration``."""
    uhv = steady_uhv_pressure(trap_pressure, r_trap, r_uhv)
    uhv_gas = GasCondition(uhv, temperature, molar_mass)
    trap_gas = GasCondition(trap_pressure, temperature, molar_mass)
    collisions = collision_expectation(uhv_gas, particle_radius, duration)
    return PressureBudget(
        trap_pressure=trap_pressure,
        uhv_pressure=uhv,
        pressure_ratio=(r_uhv / r_trap) ** 2,
        expected_collisions=collisions,
        coherent_ok=coherent_ok(collisions),
        trap_knudsen=knudsen_number(trap_gas, Aperture(r_trap)),
        uhv_knudsen=knudsen_number(uhv_gas, Aperture(r_uhv)),
        required_uhv_pressure=required_pressure_for_collisions(1.0, particle_radius, duration, temperature, molar_mass),
    )
