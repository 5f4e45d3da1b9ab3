import json

import numpy as np
import pytest

from fibreqm.checks import run_scenario
from fibreqm.cli import main as cli_main
from fibreqm.report import emit, report_from_dict, suite_from_dict
from fibreqm.scenario import (
    ConfigError,
    catalog_names,
    load_scenario,
    scenario_from_dict,
)
from fibreqm.suite import run_suite

MINIMAL = {
    "name": "minimal",
    "dimension": 2,
    "grid": {"t0": 0.0, "t1": 1.0, "steps": 50},
    "hamiltonian": {"kind": "pauli", "coefficients": {"z": 1.0}},
    "trivialization": {"kind": "identity"},
}


def write_config(tmp_path, raw, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return path


class TestLoading:
    def test_minimal_config_fills_defaults(self):
        cfg = scenario_from_dict(dict(MINIMAL))
        assert cfg.tolerances["state_equivalence"] == 1e-6
        assert cfg.tolerances["density_consistency"] == 1e-8
        assert cfg.seed == 0
        assert cfg.initial_state[0] == 1.0
        assert "state_equivalence" in cfg.checks
        assert cfg.echo["tolerances"]["eq_tol"] == 1e-6
        assert cfg.echo["tolerances"]["prop_tol"] == 1e-8

    def test_dimension_mismatch_is_named(self):
        raw = dict(MINIMAL)
        raw["observables"] = [{"kind": "diagonal", "entries": [1, 0, -1], "name": "bad"}]
        with pytest.raises(ConfigError, match="entries"):
            scenario_from_dict(raw)

    def test_matrix_dimension_checked(self):
        raw = dict(MINIMAL)
        raw["hamiltonian"] = {"kind": "constant",
                              "matrix": [[[1, 0], [0, 0], [0, 0]],
                                         [[0, 0], [1, 0], [0, 0]],
                                         [[0, 0], [0, 0], [1, 0]]]}
        with pytest.raises(ConfigError, match="2x2"):
            scenario_from_dict(raw)

    def test_tolerance_overrides(self):
        raw = dict(MINIMAL)
        raw["tolerances"] = {"eq_tol": 1e-5, "state_equivalence": 1e-4}
        cfg = scenario_from_dict(raw)
        assert cfg.tolerances["state_equivalence"] == 1e-4
        assert cfg.tolerances["physics_closed_form"] == 1e-5

    def test_unknown_keys_rejected(self):
        raw = dict(MINIMAL)
        raw["surprise"] = 1
        with pytest.raises(ConfigError, match="surprise"):
            scenario_from_dict(raw)

    def test_unknown_check_rejected(self):
        raw = dict(MINIMAL)
        raw["checks"] = ["state_equivalence", "nonsense"]
        with pytest.raises(ConfigError, match="nonsense"):
            scenario_from_dict(raw)

    def test_bad_grid_rejected(self):
        raw = dict(MINIMAL)
        raw["grid"] = {"t0": 1.0, "t1": 0.0, "steps": 10}
        with pytest.raises(ConfigError, match="t0 < t1"):
            scenario_from_dict(raw)
        raw["grid"] = {"t0": 0.0, "t1": 1.0, "steps": 1}
        with pytest.raises(ConfigError, match="steps"):
            scenario_from_dict(raw)

    def test_parse_error_reports_line(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{\n  "name": "x",\n  oops\n}\n')
        with pytest.raises(ConfigError, match="line 3"):
            load_scenario(path)

    def test_complex_entry_format_enforced(self):
        raw = dict(MINIMAL)
        raw["initial_state"] = [[1.0], [0.0]]
        with pytest.raises(ConfigError, match=r"\[re, im\]"):
            scenario_from_dict(raw)

    def test_catalog_has_ten_scenarios(self):
        names = [name for name, _ in catalog_names()]
        assert len(names) == 10
        assert len(set(names)) == 10
        assert "degenerate-single-point" in names
        assert "rabi-drive" in names

    def test_time_dependent_observable_resolution(self):
        raw = dict(MINIMAL)
        raw["observables"] = [{"kind": "pauli", "axis": "z", "name": "wobble",
                               "modulation": {"omega": 2.0, "offset": 0.5}}]
        cfg = scenario_from_dict(raw)
        name, stack = cfg.observables[0]
        assert name == "wobble"
        assert stack.shape == (51, 2, 2)
        k = 10
        expected = (0.5 + np.cos(2.0 * cfg.times[k])) * np.diag([1.0, -1.0])
        assert np.allclose(stack[k], expected)
        report = run_scenario(cfg)
        assert report.record("mean_value_invariance").passed


class TestRunScenario:
    def test_minimal_run_passes(self):
        report = run_scenario(scenario_from_dict(dict(MINIMAL)))
        assert report.overall_pass
        assert {r.check for r in report.records} == set(scenario_from_dict(dict(MINIMAL)).checks)

    def test_each_requested_check_appears_exactly_once(self):
        report = run_scenario(scenario_from_dict(dict(MINIMAL)))
        ids = [r.check for r in report.records]
        assert len(ids) == len(set(ids))

    def test_failure_surfaces_as_record_not_exception(self):
        from fibreqm.bundle import TrivializationFamily
        cfg = scenario_from_dict(dict(MINIMAL))
        cfg.trivialization = TrivializationFamily(
            lambda t: np.diag([t - 0.5, 1.0]).astype(complex), 2, name="singular-mid")
        report = run_scenario(cfg)
        assert not report.overall_pass
        setup = report.record("setup")
        assert not setup.passed
        assert "Singular" in setup.detail or "singular" in setup.detail

    def test_determinism_byte_identical(self):
        raw = dict(MINIMAL)
        raw["seed"] = 123
        raw["trivialization"] = {"kind": "random-smooth-unitary", "scale": 0.4}
        rep1 = run_scenario(scenario_from_dict(raw))
        rep2 = run_scenario(scenario_from_dict(raw))
        blob1 = json.dumps(rep1.to_dict(include_timing=False), sort_keys=True)
        blob2 = json.dumps(rep2.to_dict(include_timing=False), sort_keys=True)
        assert blob1.encode() == blob2.encode()

    def test_fault_injection_breaks_state_equivalence(self):
        raw = dict(MINIMAL)
        raw["trivialization"] = {"kind": "global-phase", "omega": 6.283185307179586}
        raw["faults"] = {"drop_trivialization_derivative": True}
        report = run_scenario(scenario_from_dict(raw))
        record = report.record("state_equivalence")
        assert not record.passed
        assert record.max_residual >= 1e-2


class TestSuite:
    def test_directory_suite_failing_record_first(self, tmp_path):
        good = dict(MINIMAL, name="alpha-good")
        bad = dict(MINIMAL, name="beta-bad",
                   trivialization={"kind": "global-phase", "omega": 6.283185307179586},
                   faults={"drop_trivialization_derivative": True})
        write_config(tmp_path, good, "a.json")
        write_config(tmp_path, bad, "b.json")
        report = run_suite(tmp_path)
        assert not report.overall_pass
        assert [r.scenario for r in report.reports] == ["alpha-good", "beta-bad"]
        table = emit(report, "table").decode()
        first_data_row = table.splitlines()[2]
        assert "beta-bad" in first_data_row  # failures surface first

    def test_manifest_suite(self, tmp_path):
        write_config(tmp_path, dict(MINIMAL, name="one"), "one.json")
        write_config(tmp_path, dict(MINIMAL, name="two"), "two.json")
        manifest = tmp_path / "manifest.json"
        manifest.write_text(json.dumps({"scenarios": ["one.json", "two.json"]}))
        report = run_suite(manifest)
        assert report.overall_pass
        assert len(report.reports) == 2

    def test_empty_manifest_vacuous_pass_with_warning(self, tmp_path):
        manifest = tmp_path / "manifest.json"
        manifest.write_text(json.dumps({"scenarios": []}))
        report = run_suite(manifest)
        assert report.overall_pass
        assert report.warnings
        assert "empty" in report.warnings[0]

    def test_order_independence(self, tmp_path):
        raw_a = dict(MINIMAL, name="s-a", seed=1)
        raw_b = dict(MINIMAL, name="s-b", seed=2)
        one = run_suite_from(tmp_path / "d1", [raw_a, raw_b])
        two = run_suite_from(tmp_path / "d2", [raw_b, raw_a])
        blob1 = json.dumps(one.to_dict(include_timing=False), sort_keys=True)
        blob2 = json.dumps(two.to_dict(include_timing=False), sort_keys=True)
        assert blob1 == blob2


def run_suite_from(directory, raws):
    directory.mkdir()
    for i, raw in enumerate(raws):
        (directory / f"{i}.json").write_text(json.dumps(raw))
    return run_suite(directory)


class TestEmission:
    def test_records_roundtrip(self):
        report = run_scenario(scenario_from_dict(dict(MINIMAL)))
        blob = emit(report, "records")
        loaded = report_from_dict(json.loads(blob))
        assert loaded.scenario == report.scenario
        assert loaded.overall_pass == report.overall_pass
        assert [r.check for r in loaded.records] == [r.check for r in report.records]

    def test_timeseries_one_row_per_grid_point_per_quantity(self):
        report = run_scenario(scenario_from_dict(dict(MINIMAL)))
        csv = emit(report, "timeseries").decode()
        lines = csv.strip().splitlines()
        quantities = {q for q in report.timeseries if q != "time"}
        grid_points = len(report.timeseries["time"])
        assert len(lines) == 1 + grid_points * len(quantities)
        assert lines[0] == "scenario,time,quantity,value"

    def test_table_contains_verdicts(self):
        report = run_scenario(scenario_from_dict(dict(MINIMAL)))
        table = emit(report, "table").decode()
        assert "state_equivalence" in table
        assert "PASS" in table

    def test_unknown_format_rejected(self):
        report = run_scenario(scenario_from_dict(dict(MINIMAL)))
        with pytest.raises(ValueError, match="format"):
            emit(report, "yaml")

    def test_schema_version_embedded(self):
        report = run_scenario(scenario_from_dict(dict(MINIMAL)))
        payload = json.loads(emit(report, "records"))
        assert payload["schema_version"] == 1
        assert payload["kind"] == "scenario-report"


class TestCli:
    def test_catalog_listing(self, capsys):
        assert cli_main(["catalog"]) == 0
        out = capsys.readouterr().out
        assert "rabi-drive" in out
        assert len(out.strip().splitlines()) == 10

    def test_run_config_file(self, tmp_path, capsys):
        path = write_config(tmp_path, dict(MINIMAL))
        assert cli_main(["run", str(path)]) == 0
        assert "minimal" in capsys.readouterr().out

    def test_run_catalog_by_name(self, capsys):
        assert cli_main(["run", "degenerate-single-point", "--format", "records"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["overall_pass"] is True

    def test_run_failing_scenario_exits_nonzero(self, tmp_path, capsys):
        raw = dict(MINIMAL,
                   trivialization={"kind": "global-phase", "omega": 6.283185307179586},
                   faults={"drop_trivialization_derivative": True})
        path = write_config(tmp_path, raw)
        assert cli_main(["run", str(path)]) == 1

    def test_config_error_exit_code(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{nope}")
        assert cli_main(["run", str(path)]) == 2

    def test_output_dir_writes_records(self, tmp_path, capsys, monkeypatch):
        path = write_config(tmp_path, dict(MINIMAL))
        out_dir = tmp_path / "reports"
        assert cli_main(["run", str(path), "--output", str(out_dir)]) == 0
        records = out_dir / "minimal.records.json"
        assert records.exists()
        payload = json.loads(records.read_text())
        assert payload["scenario"] == "minimal"

    def test_output_dir_from_environment(self, tmp_path, capsys, monkeypatch):
        path = write_config(tmp_path, dict(MINIMAL))
        out_dir = tmp_path / "env-reports"
        monkeypatch.setenv("FIBREQM_OUTPUT_DIR", str(out_dir))
        assert cli_main(["run", str(path)]) == 0
        assert (out_dir / "minimal.records.json").exists()

    def test_emit_roundtrip(self, tmp_path, capsys):
        path = write_config(tmp_path, dict(MINIMAL))
        out_dir = tmp_path / "reports"
        cli_main(["run", str(path), "--output", str(out_dir)])
        capsys.readouterr()
        assert cli_main(["emit", str(out_dir / "minimal.records.json"),
                         "--format", "table"]) == 0
        assert "state_equivalence" in capsys.readouterr().out

    def test_suite_of_catalog(self, tmp_path, capsys):
        # a tiny directory suite keeps this fast; catalog suite runs in acceptance
        write_config(tmp_path, dict(MINIMAL, name="cli-suite-a"), "a.json")
        write_config(tmp_path, dict(MINIMAL, name="cli-suite-b"), "b.json")
        assert cli_main(["suite", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "cli-suite-a" in out and "cli-suite-b" in out

    def test_suite_records_roundtrip(self, tmp_path, capsys):
        write_config(tmp_path, dict(MINIMAL, name="rt"), "rt.json")
        assert cli_main(["suite", str(tmp_path), "--format", "records"]) == 0
        payload = json.loads(capsys.readouterr().out)
        suite = suite_from_dict(payload)
        assert suite.overall_pass
