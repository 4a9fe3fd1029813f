"""
Physical constants, unit-tagged quantities and gas-kinetic primitives.

Every other module imports its constants from here. Quantities carry one
unit tag from a small closed set; adding or comparing quantities with
different tags is rejected, as is multiplying two dimensioned quantities
(the toolkit never needs derived units beyond the set below).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

from massive.errors import InvalidInputError, UnitMismatchError
from massive.validation import validate_finite, validate_non_negative, validate_positive

UNITS = frozenset({
    "m", "s", "kg", "K", "T", "T/m", "Pa", "J/K", "rad", "mol", "W", "dimensionless",
})

# Pressure tags accepted by convert_pressure, in pascal.
PRESSURE_UNITS = {
    "Pa": 1.0,
    "mbar": 100.0,
    "atm": 101325.0,
}


@dataclass(frozen=True)
class Constants:
    """Physical constants (SI). Immutable after import."""
    bohr_magneton: float = 9.2740e-24         # J/T
    reduced_planck: float = 1.0546e-34        # J s
    boltzmann: float = 1.3807e-23             # J/K
    gas_constant: float = 8.314               # J/(mol K)
    g_earth: float = 9.81                     # m/s^2
    nv_g_factor: float = 2.003
    helium_molar_mass: float = 4.003e-3       # kg/mol
    carbon_atomic_mass: float = 1.993e-26     # kg
    diamond_density_default: float = 3510.0   # kg/m^3
    diamond_debye_temperature: float = 2220.0  # K
    helium_kinetic_diameter: float = 2.6e-10  # m

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not value > 0:
                raise InvalidInputError(f"constant {name} must be positive, got {value}")

    @property
    def avogadro(self) -> float:
        """N_A = R / k_B, kept consistent with the two stored constants."""
        return self.gas_constant / self.boltzmann


CONSTANTS = Constants()

Number = Union[int, float]


@dataclass(frozen=True)
class Quantity:
    """A finite value tagged with one unit from ``UNITS``."""
    value: float
    unit: str = "dimensionless"

    def __post_init__(self):
        if self.unit not in UNITS:
            raise UnitMismatchError(f"unknown unit '{self.unit}'; allowed: {sorted(UNITS)}")
        object.__setattr__(self, "value", validate_finite(self.value, "value", f"Quantity[{self.unit}]"))

    def _same_unit(self, other: "Quantity", op: str) -> None:
        if not isinstance(other, Quantity):
            raise UnitMismatchError(f"cannot {op} {self.unit} quantity and {type(other).__name__}")
        if other.unit != self.unit:
            raise UnitMismatchError(f"cannot {op} '{self.unit}' and '{other.unit}'")

    def __add__(self, other: "Quantity") -> "Quantity":
        self._same_unit(other, "add")
        return Quantity(self.value + other.value, self.unit)

    def __sub__(self, other: "Quantity") -> "Quantity":
        self._same_unit(other, "subtract")
        return Quantity(self.value - other.value, self.unit)

    def __neg__(self) -> "Quantity":
        return Quantity(-self.value, self.unit)

    def __mul__(self, other: Union["Quantity", Number]) -> "Quantity":
        if isinstance(other, Quantity):
            if other.unit == "dimensionless":
                return Quantity(self.value * other.value, self.unit)
            if self.unit == "dimensionless":
                return Quantity(self.value * other.value, other.unit)
            raise UnitMismatchError(f"product '{self.unit}*{other.unit}' is outside the unit set")
        if isinstance(other, bool) or not isinstance(other, (int, float)):
            return NotImplemented
        return Quantity(self.value * other, self.unit)

    __rmul__ = __mul__

    def __truediv__(self, other: Union["Quantity", Number]) -> "Quantity":
        if isinstance(other, Quantity):
            if other.unit == self.unit:
                return Quantity(self.value / other.value, "dimensionless")
            if other.unit == "dimensionless":
                return Quantity(self.value / other.value, self.unit)
            raise UnitMismatchError(f"quotient '{self.unit}/{other.unit}' is outside the unit set")
        if isinstance(other, bool) or not isinstance(other, (int, float)):
            return NotImplemented
        return Quantity(self.value / other, self.unit)

    def _compare(self, other: "Quantity") -> float:
        self._same_unit(other, "compare")
        return self.value - other.value

    def __lt__(self, other: "Quantity") -> bool:
        return self._compare(other) < 0

    def __le__(self, other: "Quantity") -> bool:
        return self._compare(other) <= 0

    def __gt__(self, other: "Quantity") -> bool:
        return self._compare(other) > 0

    def __ge__(self, other: "Quantity") -> bool:
        return self._compare(other) >= 0

    def __float__(self) -> float:
        return self.value

    def __str__(self) -> str:
        if self.unit == "dimensionless":
            return f"{self.value:.4g}"
        return f"{self.value:.4g} {self.unit}"


def convert_pressure(value: float, from_unit: str, to_unit: str) -> float:
    """
    Convert a pressure between Pa, mbar and atm (1 mbar = 100 Pa, 1 atm = 1013.25 mbar).

    Raises:
        UnitMismatchError: If either unit tag is unknown
    """
    for tag in (from_unit, to_unit):
        if tag not in PRESSURE_UNITS:
            raise UnitMismatchError(f"unknown pressure unit '{tag}'; allowed: {sorted(PRESSURE_UNITS)}")
    value = validate_finite(value, "pressure", "convert_pressure")
    if from_unit == to_unit:
        return value
    return value * PRESSURE_UNITS[from_unit] / PRESSURE_UNITS[to_unit]


def mean_thermal_speed(temperature: float, molar_mass: float = CONSTANTS.helium_molar_mass) -> float:
    """Kinetic-theory mean speed sqrt(8RT/(pi M)) in m/s."""
    temperature = validate_positive(temperature, "temperature", "mean_thermal_speed")
    molar_mass = validate_positive(molar_mass, "molar_mass", "mean_thermal_speed")
    return math.sqrt(8.0 * CONSTANTS.gas_constant * temperature / (math.pi * molar_mass))


def number_density(pressure: float, temperature: float) -> float:
    """Ideal-gas particle density P/(k_B T) in m^-3."""
    pressure = validate_non_negative(pressure, "pressure", "number_density")
    temperature = validate_positive(temperature, "temperature", "number_density")
    return pressure / (CONSTANTS.boltzmann * temperature)


def molar_density(pressure: float, temperature: float) -> float:
    """Ideal-gas molar density P/(R T) in mol/m^3."""
    pressure = validate_non_negative(pressure, "pressure", "molar_density")
    temperature = validate_positive(temperature, "temperature", "molar_density")
    return pressure / (CONSTANTS.gas_constant * temperature)


def atom_mass(molar_mass: float) -> float:
    """Mass of one atom/molecule of a species, kg."""
    molar_mass = validate_positive(molar_mass, "molar_mass", "atom_mass")
    return molar_mass / CONSTANTS.avogadro
