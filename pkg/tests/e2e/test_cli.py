"""
End-to-end tests through the command line entry point.
"""
import logging

import pytest

from massive.toolkit_cli import EXIT_GATE_FAILURE, EXIT_INPUT_ERROR, EXIT_OK, main
from massive.reporting import read_csv


def _run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.mark.e2e
class TestClosureCommand:
    def test_prints_closed_timing(self, capsys):
        code, out, _ = _run(capsys, "closure", "--t1", "0.1")
        assert code == EXIT_OK
        assert "(0.1, 0.3, 0.4)" in out
        assert "[FAIL]" not in out

    def test_suffix_accepted(self, capsys):
        code, out, _ = _run(capsys, "closure", "--t1", "50 ms")
        assert code == EXIT_OK
        assert "(0.05, 0.15, 0.2)" in out

    def test_trajectory_csv(self, capsys, tmp_path):
        path = tmp_path / "trajectory.csv"
        code, _, _ = _run(capsys, "closure", "--output", str(path))
        rows = read_csv(path)
        assert code == EXIT_OK
        assert list(rows[0]) == ["time_s", "dz_m", "dv_mps"]
        assert float(rows[0]["dz_m"]) == 0.0
        assert abs(float(rows[-1]["dz_m"])) < 1e-15


@pytest.mark.e2e
class TestBudgetCommand:
    def test_defaults_pass_every_gate(self, capsys):
        code, out, _ = _run(capsys, "budget")
        assert code == EXIT_OK
        assert out.startswith("MASSIVE design budget")
        assert "[FAIL]" not in out

    def test_quoted_orientation_figure_beside_model(self, capsys):
        code, out, _ = _run(capsys, "budget")
        line = next(row for row in out.splitlines() if "single_orientation_probability" in row)
        assert code == EXIT_OK
        assert "[pass]" in line
        assert "quoted 0.933 at 6 NV" in line

    def test_residual_gas_effusion_reported(self, capsys):
        _, out, _ = _run(capsys, "budget", "--format", "csv")
        row = next(r for r in out.splitlines() if "residual_gas_effusion_ratio" in r)
        assert float(row.split(",")[2]) == pytest.approx((28.0 / 4.003) ** -0.5, rel=1e-12)

    def test_rerun_is_byte_identical(self, capsys):
        _, first, _ = _run(capsys, "budget", "--format", "csv")
        _, second, _ = _run(capsys, "budget", "--format", "csv")
        assert first == second

    def test_seed_flag_overrides_scenario(self, capsys, scenario_file):
        path = scenario_file("[run]\nseed = 11\n")
        _, from_file, _ = _run(capsys, "budget", "--format", "csv", "--scenario", path)
        _, from_flag, _ = _run(capsys, "budget", "--format", "csv", "--scenario", path, "--seed", "12")
        _, again, _ = _run(capsys, "budget", "--format", "csv", "--seed", "11")
        assert from_file != from_flag
        assert from_file == again

    def test_tilted_gradient_fails_with_warning(self, capsys, caplog, scenario_file):
        path = scenario_file("[interferometer]\ncos_theta = 1e-4\n")
        with caplog.at_level(logging.WARNING):
            code, out, _ = _run(capsys, "budget", "--scenario", path)
        assert code == EXIT_GATE_FAILURE
        assert "pseudo-random phase" in out
        assert "Phase scatter exceeds control" in caplog.text

    def test_bad_scenario_is_input_error(self, capsys, scenario_file):
        path = scenario_file("[diamond]\nradius = -1 um\ncolour = blue\n")
        code, out, err = _run(capsys, "budget", "--scenario", path)
        assert code == EXIT_INPUT_ERROR
        assert out == ""
        assert "line 2" in err and "line 3" in err

    def test_missing_scenario_file(self, capsys, tmp_path):
        code, _, err = _run(capsys, "budget", "--scenario", str(tmp_path / "nope.ini"))
        assert code == EXIT_INPUT_ERROR
        assert "cannot read scenario" in err

    def test_unknown_command(self, capsys):
        assert main(["launch"]) == EXIT_INPUT_ERROR

    def test_audit_record_written(self, capsys, monkeypatch, tmp_path, audit_records):
        monkeypatch.setenv("MASSIVE_AUDIT_LOG_DIR", str(tmp_path))
        code, _, _ = _run(capsys, "closure")
        records = audit_records(tmp_path)
        assert code == EXIT_OK
        assert len(records) == 1
        assert records[0]["command"] == "closure"
        assert records[0]["exit_code"] == EXIT_OK
        assert records[0]["seed"] == 20180801


@pytest.mark.e2e
class TestSweepCommand:
    def test_radius_sweep_csv(self, capsys, tmp_path):
        path = tmp_path / "sweep.csv"
        code, _, _ = _run(capsys, "sweep", "--param", "diamond.radius", "--values", "0.25um,0.5um,1um",
                          "--output", str(path))
        rows = read_csv(path)
        assert code == EXIT_OK
        assert [float(r["value"]) for r in rows] == pytest.approx([0.25e-6, 0.5e-6, 1e-6])
        assert float(rows[0]["separation_m"]) == pytest.approx(8 * float(rows[1]["separation_m"]), rel=1e-9)

    def test_grid(self, capsys):
        code, out, _ = _run(capsys, "sweep", "--param", "magnetics.gradient", "--grid", "5e3,1e4,2", "--format", "csv")
        assert code == EXIT_OK
        assert len(out.strip().splitlines()) == 3

    def test_unknown_parameter(self, capsys):
        code, _, err = _run(capsys, "sweep", "--param", "diamond.colour", "--values", "1")
        assert code == EXIT_INPUT_ERROR
        assert "does not resolve" in err

    def test_values_and_grid_exclusive(self, capsys):
        assert main(["sweep", "--param", "diamond.radius", "--values", "1", "--grid", "1,2,2"]) == EXIT_INPUT_ERROR


@pytest.mark.e2e
class TestCampaignCommand:
    def test_writes_report_and_fringes(self, capsys, tmp_path, scenario_file):
        scenario = scenario_file("[campaign]\nparticles = 20\nscan_points = 21\ndrops_per_point = 200\n")
        path = tmp_path / "campaign.csv"
        code, out, _ = _run(capsys, "campaign", "--scenario", scenario, "--output", str(path))
        assert code == EXIT_OK
        assert "particles_accepted" in out
        fringes = read_csv(tmp_path / "campaign_fringes.csv")
        assert len(fringes) == 21

    def test_poor_vacuum_aborts(self, capsys, scenario_file):
        scenario = scenario_file("[campaign]\nparticles = 5\n[vacuum]\nuhv_pressure = 1e-6 mbar\n")
        code, out, _ = _run(capsys, "campaign", "--scenario", scenario)
        assert code == EXIT_GATE_FAILURE
        assert "GradientFall:decohered" in out


@pytest.mark.e2e
class TestSensitivityAndSchedule:
    def test_zero_jitter_keeps_full_visibility(self, capsys, scenario_file):
        path = scenario_file("[jitter]\ntime = 0\ngradient = 0\n")
        code, out, _ = _run(capsys, "sensitivity", "--scenario", path, "--format", "csv")
        rows = {line.split(",")[1]: line.split(",")[2] for line in out.strip().splitlines()[1:]}
        assert code == EXIT_OK
        assert float(rows["jitter_visibility"]) == pytest.approx(1.0, abs=1e-12)
        assert float(rows["expected_visibility"]) == 1.0

    def test_schedule_csv(self, capsys, tmp_path):
        path = tmp_path / "antennas.csv"
        code, out, _ = _run(capsys, "schedule", "--output", str(path))
        rows = read_csv(path)
        assert code == EXIT_OK
        assert list(rows[0]) == ["antenna_index", "pulse_count", "first_pulse_s", "last_pulse_s"]
        assert int(rows[-1]["antenna_index"]) == 78
        assert sum(int(r["pulse_count"]) for r in rows) == 10_000
        assert "note:" in out

    def test_short_layout_fails(self, capsys, scenario_file):
        path = scenario_file("[drop]\nantenna_count = 50\n")
        code, _, err = _run(capsys, "schedule", "--scenario", path)
        assert code == EXIT_INPUT_ERROR
        assert "antenna" in err


@pytest.mark.e2e
class TestRerunIdentity:
    CAMPAIGN = "[campaign]\nparticles = 20\nscan_points = 21\ndrops_per_point = 200\n"

    @pytest.mark.parametrize(
        "argv,outputs",
        [
            (["closure", "--t1", "0.1"], ["run.csv"]),
            (["sweep", "--param", "diamond.radius", "--values", "0.25um,0.5um,1um", "--seed-policy", "per_point"],
             ["run.csv"]),
            (["schedule"], ["run.csv"]),
            (["sensitivity"], ["run.csv"]),
            (["campaign"], ["run.csv", "run_fringes.csv"]),
        ],
    )
    def test_output_files_byte_identical(self, capsys, tmp_path, scenario_file, argv, outputs):
        scenario = scenario_file(self.CAMPAIGN)
        stdouts = []
        for run in ("first", "second"):
            code, out, _ = _run(capsys, *argv, "--scenario", scenario, "--output", str(tmp_path / run / "run.csv"))
            assert code == EXIT_OK
            stdouts.append(out)
        assert stdouts[0] == stdouts[1]
        for name in outputs:
            assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()
