"""
Tests for effusion, differential pumping, collision budgets and helium cooling.
"""
import logging
import math

import pytest

from massive.errors import InvalidInputError
from massive.physical_base import atom_mass, convert_pressure
from massive.vacuum_thermal import (
    Aperture,
    GasCondition,
    blackbody_gate,
    coherent_ok,
    collision_expectation,
    cooling_report,
    effusion_flux,
    graham_ratio,
    impinging_gas_mass,
    knudsen_number,
    mean_free_path,
    molecular_flow_ok,
    pressure_budget,
    required_pressure_for_collisions,
    steady_uhv_pressure,
)

TRAP_PRESSURE = convert_pressure(7e-8, "mbar", "Pa")


@pytest.mark.unit
class TestFlow:
    def test_mean_free_path_infinite_in_vacuum(self):
        assert mean_free_path(GasCondition(0.0)) == math.inf

    def test_knudsen_at_purge_pressure(self):
        gas = GasCondition(convert_pressure(100.0, "mbar", "Pa"))
        assert knudsen_number(gas, Aperture(25e-6)) == pytest.approx(4.6e-4, rel=0.05)
        assert not molecular_flow_ok(gas, Aperture(25e-6))

    def test_effusion_flux_closed_form(self):
        gas = GasCondition(TRAP_PRESSURE)
        expected = TRAP_PRESSURE / (8.314 * 5.0) * 162.7 * math.pi * (25e-6) ** 2 / 4.0
        assert effusion_flux(gas, Aperture(25e-6)) == pytest.approx(expected, rel=2e-3)

    def test_effusion_outside_molecular_flow_warns(self, caplog):
        gas = GasCondition(1e4)
        with caplog.at_level(logging.WARNING, logger="massive.vacuum_thermal"):
            effusion_flux(gas, Aperture(25e-6))
        assert any("molecular flow" in r.getMessage() for r in caplog.records)

    def test_flux_balance(self):
        uhv = steady_uhv_pressure(TRAP_PRESSURE, 25e-6, 0.08)
        inflow = effusion_flux(GasCondition(TRAP_PRESSURE), Aperture(25e-6))
        outflow = effusion_flux(GasCondition(uhv), Aperture(0.08))
        assert abs(inflow - outflow) <= 1e-12 * inflow

    def test_graham_ratio(self):
        assert graham_ratio(4.003e-3, 28.0e-3) == pytest.approx(math.sqrt(28.0 / 4.003))

    def test_negative_aperture_rejected(self):
        with pytest.raises(InvalidInputError):
            Aperture(-1.0)


@pytest.mark.unit
class TestPressureBudget:
    def test_default_budget(self):
        budget = pressure_budget(TRAP_PRESSURE, 25e-6, 0.08, 0.5e-6, 0.4)
        assert budget.pressure_ratio == pytest.approx(1.024e7, rel=1e-3)
        assert convert_pressure(budget.uhv_pressure, "Pa", "mbar") == pytest.approx(6.836e-15, rel=1e-3)
        assert convert_pressure(budget.uhv_pressure, "Pa", "mbar") < 1e-14
        assert budget.expected_collisions == pytest.approx(0.506, rel=0.01)
        assert budget.coherent_ok
        assert budget.molecular_flow_ok

    def test_required_pressure_for_one_collision(self):
        pressure = required_pressure_for_collisions(1.0, 0.5e-6, 0.4)
        assert convert_pressure(pressure, "Pa", "mbar") == pytest.approx(1.35e-14, rel=0.02)
        gas = GasCondition(pressure)
        assert collision_expectation(gas, 0.5e-6, 0.4) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.unit
class TestCollisions:
    def test_around_5e_15_mbar(self):
        gas = GasCondition(convert_pressure(5e-15, "mbar", "Pa"))
        n = collision_expectation(gas, 0.5e-6, 0.4)
        assert 0.1 <= n <= 1.0
        assert n == pytest.approx(0.37, rel=0.02)

    @pytest.mark.parametrize("factor", [0.01, 3.0, 250.0])
    def test_kinetic_rates_linear_in_pressure(self, factor):
        gas = GasCondition(1e-6)
        scaled = gas.with_pressure(1e-6 * factor)
        ap = Aperture(25e-6)
        assert effusion_flux(scaled, ap) == pytest.approx(factor * effusion_flux(gas, ap), rel=1e-12)
        assert collision_expectation(scaled, 0.5e-6, 0.4) == pytest.approx(
            factor * collision_expectation(gas, 0.5e-6, 0.4), rel=1e-12
        )

    @pytest.mark.parametrize("factor", [0.5, 4.0, 60.0])
    def test_kinetic_rates_scale_as_inverse_sqrt_temperature(self, factor):
        gas = GasCondition(1e-6, 5.0)
        hotter = GasCondition(1e-6, 5.0 * factor)
        ap = Aperture(25e-6)
        expected = 1.0 / math.sqrt(factor)
        assert effusion_flux(hotter, ap) / effusion_flux(gas, ap) == pytest.approx(expected, rel=1e-12)
        ratio = collision_expectation(hotter, 0.5e-6, 0.4) / collision_expectation(gas, 0.5e-6, 0.4)
        assert ratio == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("molar_mass", [4.003e-3, 28.0e-3, 39.95e-3])
    def test_impinging_mass_is_collisions_times_atom_mass(self, molar_mass):
        gas = GasCondition(2e-7, 12.0, molar_mass)
        collisions = collision_expectation(gas, 0.5e-6, 0.4)
        assert impinging_gas_mass(gas, 0.5e-6, 0.4) == pytest.approx(
            collisions * atom_mass(molar_mass), rel=1e-12
        )

    def test_zero_pressure_no_collisions(self):
        assert collision_expectation(GasCondition(0.0), 0.5e-6, 0.4) == 0.0

    def test_single_collision_decoheres(self):
        assert coherent_ok(0.99)
        assert not coherent_ok(1.0)

    def test_blackbody_gate(self):
        assert blackbody_gate(5.0)
        assert not blackbody_gate(300.0)


@pytest.mark.unit
class TestCooling:
    def test_impinged_mass_and_capacities(self, default_diamond):
        gas = GasCondition(convert_pressure(100.0, "mbar", "Pa"))
        report = cooling_report(default_diamond, gas, 0.1)
        assert report.impinged_mass == pytest.approx(1.23e-11, rel=0.02)
        assert report.helium_heat_capacity >= 1e-8
        assert 4e-13 <= report.diamond_heat_capacity <= 2e-12
        assert report.cooled_ok
        assert set(report.reference_masses) == {"100 mbar", "1013.25 mbar"}
        assert report.reference_masses["1013.25 mbar"] == pytest.approx(10.1325 * report.impinged_mass, rel=1e-9)

    def test_impinged_mass_linear_in_time(self, default_diamond):
        gas = GasCondition(1e4)
        assert impinging_gas_mass(gas, 0.5e-6, 0.2) == pytest.approx(2 * impinging_gas_mass(gas, 0.5e-6, 0.1))

    def test_no_exposure_does_not_cool(self, default_diamond):
        report = cooling_report(default_diamond, GasCondition(1e4), 0.0)
        assert not report.cooled_ok

    def test_rejects_non_diamond(self):
        with pytest.raises(InvalidInputError):
            cooling_report("diamond", GasCondition(1e4), 0.1)
