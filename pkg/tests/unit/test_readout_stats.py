"""
Tests for readout economics and the fringe simulation and fit.
"""
import logging
import math

import numpy as np
import pytest

from massive.errors import InvalidInputError
from massive.readout_stats import (
    FringeDataset,
    ReadoutKind,
    ReadoutModel,
    drops_required,
    fit_fringes,
    fold_readout,
    fringe_dataset_from_csv,
    fringe_dataset_to_csv,
    simulate_fringe_scan,
    snr_from_fidelity,
    unfold_readout,
)

OMEGA = 2.0 * math.pi / 10.0
SCAN = np.linspace(0.0, 40.0, 41)


def linear_phase(phi0: float = 0.3):
    return lambda x: OMEGA * x + phi0


@pytest.mark.unit
class TestReadoutEconomics:
    def test_snr_from_fidelity(self):
        assert snr_from_fidelity(0.95) == pytest.approx(2.920, abs=1e-3)
        assert snr_from_fidelity(0.9) == pytest.approx(1.886, abs=1e-3)

    def test_perfect_fidelity_capped(self):
        assert snr_from_fidelity(1.0) == 100.0

    def test_no_information_rejected(self):
        with pytest.raises(InvalidInputError):
            snr_from_fidelity(0.5)

    def test_room_temperature_drops(self):
        assert drops_required(ReadoutModel.room(0.03), 10.0) == 111_112

    def test_cryogenic_drops(self):
        assert drops_required(ReadoutModel.cryogenic(0.95), 10.0) == 12

    def test_reduction_factor(self):
        room = drops_required(ReadoutModel.room(0.03), 10.0)
        cryo = drops_required(ReadoutModel.cryogenic(0.95), 10.0)
        assert 7e3 <= room / cryo <= 1.3e4

    @pytest.mark.parametrize("snr", np.logspace(-2.5, 0.5, 13))
    def test_drops_inverse_quadratic_in_snr(self, snr):
        ideal = (10.0 / snr) ** 2
        drops = drops_required(ReadoutModel.room(float(snr)), 10.0)
        assert ideal * (1.0 - 1e-9) <= drops < ideal + 1.0
        quartered = drops_required(ReadoutModel.room(float(snr) / 2.0), 10.0)
        assert 4.0 * ideal * (1.0 - 1e-9) <= quartered < 4.0 * ideal + 1.0

    def test_exact_ratio_not_rounded_up(self):
        assert drops_required(ReadoutModel.room(1.0), 1.0) == 1

    def test_room_readout_has_no_flips(self):
        model = ReadoutModel.room()
        assert model.kind is ReadoutKind.ROOM_TEMPERATURE
        assert model.flip_fidelity == 1.0
        assert model.extra_variance == pytest.approx(1.0 / 0.03 ** 2)

    def test_fold_unfold(self):
        p = np.array([0.0, 0.25, 1.0])
        assert unfold_readout(fold_readout(p, 0.9), 0.9) == pytest.approx(p)


@pytest.mark.unit
class TestFringeDataset:
    def test_successes_cannot_exceed_drops(self):
        with pytest.raises(InvalidInputError):
            FringeDataset(np.arange(8.0), np.full(8, 10), np.full(8, 11))

    def test_simulation_is_seeded(self):
        model = ReadoutModel.cryogenic(0.95)
        one = simulate_fringe_scan(linear_phase(), 0.6, model, SCAN, 200, seed=4)
        two = simulate_fringe_scan(linear_phase(), 0.6, model, SCAN, 200, seed=4)
        assert np.array_equal(one.successes, two.successes)
        assert one.total_drops == 41 * 200

    def test_csv_preserves_counts(self, tmp_path):
        data = simulate_fringe_scan(linear_phase(), 0.6, ReadoutModel.cryogenic(), SCAN, 200, seed=4)
        path = fringe_dataset_to_csv(data, tmp_path / "fringes.csv")
        loaded = fringe_dataset_from_csv(path, fidelity=data.fidelity)
        assert np.array_equal(loaded.successes, data.successes)
        assert np.allclose(loaded.scan_values, data.scan_values, rtol=1e-15, atol=0)

    def test_csv_missing_columns(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x,y\n1,2\n")
        with pytest.raises(InvalidInputError):
            fringe_dataset_from_csv(path)


@pytest.mark.unit
class TestFringeFit:
    def test_recovers_visibility_and_frequency(self):
        data = simulate_fringe_scan(linear_phase(), 0.6, ReadoutModel.cryogenic(0.95), SCAN, 2000, seed=12)
        fit = fit_fringes(data)
        assert fit.covers(0.6, n_sigma=4.0)
        assert fit.frequency == pytest.approx(OMEGA, rel=0.01)
        assert fit.chi_square / fit.dof < 3.0

    def test_fixed_frequency(self):
        data = simulate_fringe_scan(linear_phase(), 0.8, ReadoutModel.cryogenic(1.0), SCAN, 2000, seed=2)
        fit = fit_fringes(data, frequency=OMEGA)
        assert fit.frequency == OMEGA
        assert fit.frequency_error == 0.0
        assert fit.visibility == pytest.approx(0.8, abs=0.05)

    def test_zero_visibility(self):
        data = simulate_fringe_scan(linear_phase(), 0.0, ReadoutModel.cryogenic(1.0), SCAN, 10_000, seed=3)
        assert fit_fringes(data).visibility < 0.02

    def test_identical_points_are_degenerate(self, caplog):
        data = FringeDataset(SCAN, np.full(41, 100), np.full(41, 50))
        with caplog.at_level(logging.WARNING, logger="massive.readout_stats"):
            fit = fit_fringes(data)
        assert fit.degenerate
        assert math.isinf(fit.visibility_error)
        assert fit.notes

    def test_too_few_points(self):
        data = FringeDataset(np.arange(7.0), np.full(7, 10), np.full(7, 5))
        with pytest.raises(InvalidInputError):
            fit_fringes(data)

    def test_phase_wrapped(self):
        data = simulate_fringe_scan(linear_phase(2.5), 0.7, ReadoutModel.cryogenic(1.0), SCAN, 2000, seed=8)
        fit = fit_fringes(data)
        assert -math.pi <= fit.phase_offset < math.pi
        assert fit.visibility >= 0.0

    @pytest.mark.slow
    def test_coverage_over_seeds(self):
        seeds = 300
        model = ReadoutModel.cryogenic(0.95)
        one_sigma = three_sigma = 0
        for seed in range(seeds):
            data = simulate_fringe_scan(linear_phase(), 0.6, model, SCAN, 500, seed=seed)
            fit = fit_fringes(data)
            one_sigma += fit.covers(0.6, 1.0)
            three_sigma += fit.covers(0.6, 3.0)
        assert 0.62 <= one_sigma / seeds <= 0.74
        assert three_sigma / seeds >= 0.97
