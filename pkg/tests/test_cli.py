"""Tests for the command line interface."""

import json
import math
from unittest.mock import patch

from typer.testing import CliRunner

from spbm_coverage.cli import app
from spbm_coverage.core.types import CheckResult, SuiteResult
from spbm_coverage.utils.reports import read_report

runner = CliRunner()

CONFIG = {
    "experiment": {
        "study": "coverage",
        "schedule": {"d": 2, "k": 1, "beta": 0.0},
        "law": "det:1",
        "region": {"lo": [0, 0], "hi": [1, 1]},
        "t_values": [20],
        "replications": 3,
        "master_seed": 1,
        "record_timings": False,
    }
}


def _config_file(tmp_path, data=None):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(data or CONFIG, indent=2))
    return path


def test_constants_json():
    result = runner.invoke(app, ["constants", "--d", "2", "--k", "1", "--law", "det:1", "--format", "json"])
    assert result.exit_code == 0
    values = json.loads(result.stdout)
    assert math.isclose(values["c_dkY"], 1.0, rel_tol=1e-12)
    assert math.isclose(values["c_0"], math.pi, rel_tol=1e-12)
    assert math.isclose(values["limit_prob"], math.exp(-1), rel_tol=1e-12)


def test_constants_three_dimensions():
    result = runner.invoke(app, ["constants", "--d", "3", "--format", "json"])
    assert result.exit_code == 0
    assert math.isclose(json.loads(result.stdout)["c_dkY"], 3 * math.pi**2 / 32, rel_tol=1e-12)


def test_constants_table_with_t():
    result = runner.invoke(app, ["constants", "--t", "1000"])
    assert result.exit_code == 0
    assert "r_t" in result.stdout
    assert "theta_d" in result.stdout


def test_constants_rejects_bad_parameters():
    assert runner.invoke(app, ["constants", "--d", "1"]).exit_code == 2
    assert runner.invoke(app, ["constants", "--law", "gauss:1"]).exit_code == 2
    assert runner.invoke(app, ["constants", "--t", "0.5"]).exit_code == 2


def test_run_writes_report(tmp_path):
    out = tmp_path / "report.csv"
    result = runner.invoke(app, ["run", "--config", str(_config_file(tmp_path)), "--out", str(out)])
    assert result.exit_code == 0
    assert "Report written to" in result.stdout
    report = read_report(out)
    assert len(report.rows) == 1
    assert report.rows[0].t == 20.0


def test_run_seed_override_is_recorded(tmp_path):
    out = tmp_path / "report.json"
    result = runner.invoke(
        app,
        ["run", "--config", str(_config_file(tmp_path)), "--seed", "99", "--format", "json", "--out", str(out)],
    )
    assert result.exit_code == 0
    assert read_report(out).config.master_seed == 99


def _csv_body(path) -> str:
    return "".join(line for line in path.read_text().splitlines(keepends=True) if not line.startswith("#"))


def test_rerun_gives_identical_csv_body_by_default(tmp_path):
    data = json.loads(json.dumps(CONFIG))
    del data["experiment"]["record_timings"]
    config = _config_file(tmp_path, data)
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert runner.invoke(app, ["run", "--config", str(config), "--out", str(first)]).exit_code == 0
    assert runner.invoke(app, ["run", "--config", str(config), "--out", str(second)]).exit_code == 0
    assert _csv_body(first) == _csv_body(second)
    assert read_report(first).rows[0].wall_time_s is None


def test_run_falls_back_to_env_workers(tmp_path, monkeypatch):
    monkeypatch.setenv("SPBM_WORKERS", "2")
    out = tmp_path / "report.json"
    result = runner.invoke(
        app, ["run", "--config", str(_config_file(tmp_path)), "--format", "json", "--out", str(out)]
    )
    assert result.exit_code == 0
    assert read_report(out).config.workers == 2


def test_config_workers_win_over_env(tmp_path, monkeypatch):
    monkeypatch.setenv("SPBM_WORKERS", "2")
    data = json.loads(json.dumps(CONFIG))
    data["experiment"]["workers"] = 1
    out = tmp_path / "report.json"
    result = runner.invoke(
        app, ["run", "--config", str(_config_file(tmp_path, data)), "--format", "json", "--out", str(out)]
    )
    assert result.exit_code == 0
    assert read_report(out).config.workers == 1


def test_run_unknown_key_exits_2(tmp_path):
    data = json.loads(json.dumps(CONFIG))
    data["experiment"]["foo"] = True
    result = runner.invoke(app, ["run", "--config", str(_config_file(tmp_path, data))])
    assert result.exit_code == 2
    assert "foo" in result.stdout


def test_run_invalid_replications_exits_2(tmp_path):
    data = json.loads(json.dumps(CONFIG))
    data["experiment"]["replications"] = 0
    result = runner.invoke(app, ["run", "--config", str(_config_file(tmp_path, data))])
    assert result.exit_code == 2


def test_run_rate_study_with_too_few_intensities_exits_1(tmp_path):
    data = json.loads(json.dumps(CONFIG))
    data["experiment"]["study"] = "rate"
    result = runner.invoke(
        app, ["run", "--config", str(_config_file(tmp_path, data)), "--out", str(tmp_path / "r.csv")]
    )
    assert result.exit_code == 1
    assert "Error" in result.stdout


def test_verify_reports_failures():
    failing = SuiteResult(
        suite="constants", checks=[CheckResult(name="G anchor", passed=False, margin=5.0)]
    )
    with patch("spbm_coverage.cli.verify_constants", return_value=failing):
        result = runner.invoke(app, ["verify", "constants"])
    assert result.exit_code == 1
    assert "Failed checks" in result.stdout


def test_verify_passes():
    passing = SuiteResult(suite="oracle", checks=[CheckResult(name="ok", passed=True)])
    with patch("spbm_coverage.cli.verify_oracle", return_value=passing) as mock_verify:
        result = runner.invoke(app, ["verify", "oracle", "--instances", "5", "--resolution", "64"])
    assert result.exit_code == 0
    assert "All checks passed" in result.stdout
    assert mock_verify.call_args.args[:3] == (5, 0, 64)


def test_verify_predicates_small_run():
    result = runner.invoke(app, ["verify", "predicates", "--n", "2000", "--d", "2"])
    assert result.exit_code == 0
    assert "cone vs hyperplane" in result.stdout


def test_verify_constants_passes_runs():
    passing = SuiteResult(suite="constants", checks=[CheckResult(name="ok", passed=True)])
    with patch("spbm_coverage.cli.verify_constants", return_value=passing) as mock_verify:
        result = runner.invoke(app, ["verify", "constants", "--n", "1000", "--runs", "100"])
    assert result.exit_code == 0
    assert mock_verify.call_args.args == (None, 1000, 0, 100)


def test_verify_rejects_zero_runs():
    assert runner.invoke(app, ["verify", "constants", "--runs", "0"]).exit_code == 2
