"""
Tests for scenario parsing, serialisation and sweep specifications.
"""
import pytest

from massive.errors import InvalidInputError, ScenarioParseError, UnitMismatchError
from massive.scenario import (
    Scenario,
    SweepSpec,
    load_scenario,
    parse_quantity,
    parse_scenario,
    parse_sweep_values,
    serialize_scenario,
)
from massive.spin_dynamics import Basis


@pytest.mark.unit
class TestParseQuantity:
    @pytest.mark.parametrize("text, unit, expected", [
        ("0.5 um", "m", 0.5e-6),
        ("100 mbar", "Pa", 1e4),
        ("4 us", "s", 4e-6),
        ("5 K", "K", 5.0),
        ("1e4", "T/m", 1e4),
        ("2.5", None, 2.5),
    ])
    def test_suffixes(self, text, unit, expected):
        assert parse_quantity(text, unit) == pytest.approx(expected, rel=1e-15)

    def test_wrong_dimension(self):
        with pytest.raises(UnitMismatchError):
            parse_quantity("5 mbar", "m")

    def test_unknown_suffix(self):
        with pytest.raises(InvalidInputError):
            parse_quantity("5 parsecs", "m")

    def test_unparsable_number(self):
        with pytest.raises(InvalidInputError):
            parse_quantity("five", "m")


@pytest.mark.unit
class TestParseScenario:
    def test_empty_text_is_defaults(self):
        assert parse_scenario("") == Scenario()

    def test_defaults(self, default_scenario):
        assert default_scenario.diamond.radius == 0.5e-6
        assert default_scenario.magnetics.gradient == 1e4
        assert default_scenario.interferometer.t1 == 0.1
        assert default_scenario.run.seed == 20180801

    def test_units_and_comments(self):
        scenario = parse_scenario(
            "# design point\n"
            "[diamond]\n"
            "radius = 0.25 um   # half size\n"
            "\n"
            "[vacuum]\n"
            "trap_pressure = 7e-8 mbar\n"
            "[spin]\n"
            "basis = double_quantum\n"
        )
        assert scenario.diamond.radius == pytest.approx(0.25e-6)
        assert scenario.vacuum.trap_pressure == pytest.approx(7e-6)
        assert scenario.spin.basis is Basis.DOUBLE_QUANTUM

    def test_negative_radius_reported_at_its_line(self):
        with pytest.raises(ScenarioParseError) as excinfo:
            parse_scenario("[diamond]\nradius = -1 um\n")
        assert [line for line, _ in excinfo.value.errors] == [2]
        assert "radius" in excinfo.value.errors[0][1]

    def test_every_error_is_listed(self):
        text = (
            "[diamond]\n"
            "colour = blue\n"
            "radius = 3 mbar\n"
            "[optics]\n"
            "lens = 1\n"
            "[drop]\n"
            "height = 1.5 m\n"
            "height = 1.4 m\n"
        )
        with pytest.raises(ScenarioParseError) as excinfo:
            parse_scenario(text)
        lines = [line for line, _ in excinfo.value.errors]
        assert lines == [2, 3, 4, 8]
        assert "line 2" in str(excinfo.value)

    def test_key_outside_section(self):
        with pytest.raises(ScenarioParseError) as excinfo:
            parse_scenario("radius = 1 um\n")
        assert excinfo.value.errors[0][0] == 1

    def test_cross_field_validation(self):
        with pytest.raises(ScenarioParseError) as excinfo:
            parse_scenario("[interferometer]\nt2 = 0.3 s\n")
        assert excinfo.value.errors[0][0] == 1

    def test_tilt_from_measured_arm_offset(self):
        scenario = parse_scenario("[interferometer]\ntilt_offset = 2 nm\ntilt_arm = 0.5 m\n")
        assert scenario.interferometer.tilt().cos_theta == pytest.approx(4e-9, rel=1e-12)

    def test_tilt_offset_longer_than_arm_rejected(self):
        with pytest.raises(ScenarioParseError):
            parse_scenario("[interferometer]\ntilt_offset = 2 m\n")

    def test_window_beyond_fall_rejected(self):
        with pytest.raises(ScenarioParseError):
            parse_scenario("[drop]\nwindow = 0.6 s\n")

    def test_integer_field_rejects_fraction(self):
        with pytest.raises(ScenarioParseError):
            parse_scenario("[spin]\ncpmg_pulses = 10.5\n")

    def test_round_trip(self):
        scenario = parse_scenario(
            "[diamond]\nradius = 0.3 um\ncarbon12_purified = true\n"
            "[interferometer]\nt1 = 0.05 s\nt2 = 0.15 s\nt3 = 0.2 s\n"
            "[vacuum]\nuhv_pressure = 5e-15 mbar\n"
            "[run]\nseed = 7\n"
        )
        assert parse_scenario(serialize_scenario(scenario)) == scenario
        assert parse_scenario(serialize_scenario(Scenario())) == Scenario()

    def test_digest_tracks_content(self, default_scenario):
        assert default_scenario.digest() == Scenario().digest()
        assert default_scenario.with_seed(1).digest() != default_scenario.digest()

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(InvalidInputError):
            load_scenario(str(tmp_path / "missing.ini"))

    def test_load_file(self, scenario_file):
        path = scenario_file("[magnetics]\ngradient = 2e4 T/m\n")
        assert load_scenario(path).magnetics.gradient == 2e4

    def test_closure_solved_when_times_omitted(self, default_scenario):
        timing = default_scenario.interferometer.timing()
        assert (timing.t2, timing.t3) == pytest.approx((0.3, 0.4))


@pytest.mark.unit
class TestSweepSpec:
    def test_values_and_grid(self):
        assert SweepSpec(parameter="diamond.radius", values=[1.0, 2.0]).points() == [1.0, 2.0]
        assert SweepSpec(parameter="diamond.radius", grid=(1.0, 3.0, 3)).points() == [1.0, 2.0, 3.0]

    def test_exactly_one_source(self):
        with pytest.raises(ValueError):
            SweepSpec(parameter="diamond.radius")

    @pytest.mark.parametrize("path", ["diamond.colour", "radius", "optics.lens", "spin.basis"])
    def test_unresolvable_path(self, path):
        with pytest.raises(InvalidInputError):
            SweepSpec(parameter=path, values=[1.0]).split_path()

    def test_apply_revalidates(self, default_scenario):
        sweep = SweepSpec(parameter="diamond.radius", values=[-1.0])
        with pytest.raises(InvalidInputError):
            sweep.apply(default_scenario, -1.0)

    def test_apply_replaces_one_field(self, default_scenario):
        updated = SweepSpec(parameter="jitter.time", values=[1e-4]).apply(default_scenario, 1e-4)
        assert updated.jitter.time == 1e-4
        assert updated.diamond == default_scenario.diamond

    def test_seed_policies(self):
        shared = SweepSpec(parameter="diamond.radius", values=[1.0])
        per_point = SweepSpec(parameter="diamond.radius", values=[1.0], seed_policy="per_point")
        assert shared.point_seed(5, 3) == 5
        assert per_point.point_seed(5, 3) != per_point.point_seed(5, 4)
        assert per_point.point_seed(5, 3) == per_point.point_seed(5, 3)

    def test_parse_values_with_units(self):
        assert parse_sweep_values("0.25 um, 0.5um,1 um", "m") == pytest.approx([0.25e-6, 0.5e-6, 1e-6])
