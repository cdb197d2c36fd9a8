import json

import numpy as np
import pytest

from pathmix import (ScenarioError, baseline_sample, evaluate, load_scenario,
                     sample_clips, scenario_from_dict)
from pathmix.mixtures import Condition
from pathmix.scenario import export_comparison_table, write_run


@pytest.fixture(scope="module")
def run_result():
    scenario = scenario_from_dict({"schedule": {"N": 8}})
    return baseline_sample(scenario, "linear", seed=4)


class TestScenarioLoading:
    def test_defaults_applied(self, tmp_path):
        path = tmp_path / "s.json"
        path.write_text(json.dumps({"layout": {"K": 4, "S": 16, "C": 4}}))
        sc = load_scenario(path)
        assert sc.total_steps == 1000 and sc.ddim_steps == 50
        assert sc.optimizer.steps == 20 and sc.optimizer.lr == 0.01
        assert sc.control.terminal_weight == 1.0
        assert sc.eval_n_clips == 200 and sc.eval_n_pairs == 2000

    def test_missing_file(self, tmp_path):
        with pytest.raises(ScenarioError):
            load_scenario(tmp_path / "absent.json")

    def test_parse_error_positioned(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{\n  broken\n}")
        with pytest.raises(ScenarioError, match="line 2"):
            load_scenario(path)

    def test_unknown_keys_rejected(self):
        with pytest.raises(ScenarioError, match="typo_key"):
            scenario_from_dict({"optimizer": {"typo_key": 1}})
        with pytest.raises(ScenarioError, match="bogus"):
            scenario_from_dict({"bogus": {}})

    def test_invalid_layout_rejected(self):
        with pytest.raises(ScenarioError):
            scenario_from_dict({"layout": {"K": 1}})
        with pytest.raises(ScenarioError):
            scenario_from_dict({"layout": {"S": 15}})

    def test_fingerprint_round_trip(self, tmp_path):
        sc = scenario_from_dict({"seed": 9, "control": {"w_T": 2.5}})
        path = tmp_path / "rt.json"
        path.write_text(json.dumps(sc.to_dict()))
        assert load_scenario(path).fingerprint == sc.fingerprint

    def test_fingerprint_sensitive_to_content(self):
        a = scenario_from_dict({})
        b = scenario_from_dict({"seed": 1})
        assert a.fingerprint != b.fingerprint


class TestWriteRun:
    def test_files_and_shapes(self, tmp_path, run_result):
        manifest_path = write_run(run_result, None, tmp_path / "run")
        out = manifest_path.parent
        for name in ("manifest.json", "segments.csv", "long_sequence.csv",
                     "omega.csv", "energy.csv"):
            assert (out / name).exists()
        omega_rows = (out / "omega.csv").read_text().strip().splitlines()
        assert len(omega_rows) == 1 + 8           # header + N steps
        assert len(omega_rows[1].split(",")) == 1 + 4
        energy_header = (out / "energy.csv").read_text().splitlines()[0]
        assert energy_header == "step,transient,terminal,total"

    def test_deterministic_except_timestamp(self, tmp_path, run_result):
        write_run(run_result, None, tmp_path / "a")
        write_run(run_result, None, tmp_path / "b")
        for name in ("segments.csv", "long_sequence.csv", "omega.csv",
                     "energy.csv"):
            assert ((tmp_path / "a" / name).read_bytes()
                    == (tmp_path / "b" / name).read_bytes())
        ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
        mb = json.loads((tmp_path / "b" / "manifest.json").read_text())
        ma.pop("created_at"), mb.pop("created_at")
        ma.pop("wall_time"), mb.pop("wall_time")
        assert ma == mb

    def test_csv_floats_round_trip_exactly(self, tmp_path, run_result):
        out = write_run(run_result, None, tmp_path / "rt").parent
        rows = (out / "long_sequence.csv").read_text().strip().splitlines()[1:]
        parsed = np.array([[float(v) for v in row.split(",")[1:]]
                           for row in rows])
        np.testing.assert_array_equal(parsed, run_result.long_sequence)

    def test_metrics_embedded_in_manifest(self, tmp_path, run_result):
        sc = scenario_from_dict({})
        model = sc.build_model()
        clips = sample_clips(model, Condition.SOURCE, 20, 1)
        report = evaluate(clips, clips, 50, 0)
        manifest = json.loads(
            write_run(run_result, report, tmp_path / "m").read_text())
        assert manifest["metrics"]["n_gen"] == 20


class TestComparisonTable:
    def test_rows_and_order(self, tmp_path):
        sc = scenario_from_dict({})
        model = sc.build_model()
        clips = sample_clips(model, Condition.SOURCE, 30, 2)
        report = evaluate(clips, clips, 50, 0)
        reports = {"mdpa": report, "sine": report, "linear": report,
                   "sigmoid": report, "ground_truth": report}
        path = export_comparison_table(reports, tmp_path / "cmp.csv")
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 6
        methods = [line.split(",")[0] for line in lines[1:]]
        assert methods == ["ground_truth", "linear", "sigmoid", "sine", "mdpa"]

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ScenarioError):
            export_comparison_table({}, tmp_path / "x.csv")
