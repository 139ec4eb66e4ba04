import csv
import json
from collections import defaultdict

import pytest

from cartocloud.cli import main


@pytest.fixture(scope="module")
def scenario_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("sc") / "scenario.json"
    assert main(["scenario-gen", "--out", str(path)]) == 0
    return path


def run_args(scenario_file, out, *extra):
    return ["run", "--scenario", str(scenario_file), "--vehicles", "40", "--penetration", "0.25",
            "--duration", "180", "--out", str(out), *extra]


class TestScenarioGen:
    def test_default_counts(self, scenario_file):
        doc = json.loads(scenario_file.read_text())
        kinds = [s["kind"] for s in doc["sites"]]
        assert kinds.count("eNodeB") == 3 and kinds.count("RSU") == 8

    def test_blocks(self, tmp_path):
        out = tmp_path / "b.json"
        assert main(["scenario-gen", "--blocks", "4", "--block-size", "250", "--out", str(out)]) == 0
        assert len(json.loads(out.read_text())["buildings"]) == 16

    def test_no_rsus(self, tmp_path):
        out = tmp_path / "r.json"
        assert main(["scenario-gen", "--rsus", "0", "--out", str(out)]) == 0
        assert all(s["kind"] != "RSU" for s in json.loads(out.read_text())["sites"])

    def test_unwritable(self, tmp_path, capsys):
        code = main(["scenario-gen", "--out", str(tmp_path / "missing" / "dir" / "x.json")])
        assert code == 2
        assert "error" in capsys.readouterr().err


class TestRun:
    def test_byte_identical(self, scenario_file, tmp_path):
        for d in ("a", "b"):
            assert main(run_args(scenario_file, tmp_path / d, "--scheme", "pcat", "--tau", "10", "--seed", "42")) == 0
        a = (tmp_path / "a" / "summary.json").read_bytes()
        assert a == (tmp_path / "b" / "summary.json").read_bytes()
        summary = json.loads(a)
        assert summary["config"]["params"]["alpha"] == 8.0  # defaults recorded for provenance

    def test_periodic_spacing(self, scenario_file, tmp_path):
        assert main(run_args(scenario_file, tmp_path, "--scheme", "periodic", "--mode", "lte", "--events")) == 0
        starts = defaultdict(list)
        with (tmp_path / "transmissions.csv").open() as fh:
            for row in csv.DictReader(fh):
                starts[row["vehicle"]].append(float(row["start"]))
        assert starts
        for ts in starts.values():
            gaps = [b - a for a, b in zip([0.0] + ts, ts)]
            assert gaps == pytest.approx([15.0] * len(gaps))
        assert (tmp_path / "events.csv").exists()

    def test_missing_scenario(self, tmp_path, capsys):
        assert main(run_args(tmp_path / "nope.json", tmp_path / "o")) == 2
        assert capsys.readouterr().err

    def test_config_error(self, scenario_file, tmp_path, capsys):
        assert main(run_args(scenario_file, tmp_path, "--t-min", "70")) == 1
        assert "configuration error" in capsys.readouterr().err

    def test_malformed_scenario(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(run_args(bad, tmp_path / "o")) == 1

    def test_optional_logs(self, scenario_file, tmp_path):
        out = tmp_path / "o"
        assert main(run_args(scenario_file, out, "--trajectories", "--predictions")) == 0
        assert (out / "trajectories.csv").exists() and (out / "predictions.csv").exists()


def test_coverage(scenario_file, tmp_path):
    out = tmp_path / "cov.csv"
    assert main(["coverage", "--scenario", str(scenario_file), "--resolution", "100", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 11 * 11
    assert all(-140 <= float(r["metric_dbm"]) <= -50 for r in rows)
