"""Tests for report writing and parsing."""

import json
import math

import pytest

from spbm_coverage.core.types import (
    Box,
    ExperimentConfig,
    ExperimentReport,
    ReportRow,
    ScalingSchedule,
    ThresholdSample,
    VacancyWitness,
)
from spbm_coverage.utils.reports import (
    CSV_COLUMNS,
    ReportFormatError,
    read_report,
    render_csv,
    write_report,
    write_samples,
    write_witnesses,
)


@pytest.fixture
def report() -> ExperimentReport:
    cfg = ExperimentConfig(
        schedule=ScalingSchedule(d=2),
        law="unif:0.5:1.5",
        region=Box.unit(2),
        t_values=[100.0, 1000.0],
        replications=10,
        master_seed=3,
    )
    rows = [
        ReportRow(
            t=100.0,
            r_t=0.1234,
            p_hat=0.3,
            std_err=math.sqrt(0.021) / math.sqrt(10),
            limit_prob=0.36,
            abs_error=0.06,
            mean_F=1.1,
            F_std_err=0.2,
            predicted_mean_F=1.0,
            wall_time_s=0.5,
        ),
        ReportRow(t=1000.0, r_t=0.05, limit_prob=0.36, predicted_mean_F=1.0, degenerate_resamples=2),
    ]
    return ExperimentReport(
        config=cfg,
        rows=rows,
        threshold_samples=[ThresholdSample(t=100.0, samples=[0.1, -0.4], ks_stat=0.3)],
        warnings=["t=1000: something to note"],
    )


def test_csv_layout(report):
    lines = render_csv(report).splitlines()
    assert lines[0].startswith("# config: ")
    assert json.loads(lines[0][len("# config: ") :])["master_seed"] == 3
    assert lines[1] == "# warning: t=1000: something to note"
    assert lines[2] == ",".join(CSV_COLUMNS)
    assert len(lines) == 5


def test_csv_round_trip(report, tmp_path):
    path = write_report(report, tmp_path / "report.csv", "csv")
    parsed = read_report(path)
    assert parsed.config == report.config
    assert parsed.rows == report.rows
    assert parsed.warnings == report.warnings


def test_json_keeps_samples(report, tmp_path):
    path = write_report(report, tmp_path / "out" / "report.json", "json")
    parsed = read_report(path)
    assert parsed == report


def test_write_leaves_no_temporary_files(report, tmp_path):
    write_report(report, tmp_path / "report.csv")
    write_report(report, tmp_path / "report.csv")
    assert [p.name for p in tmp_path.iterdir()] == ["report.csv"]


def test_malformed_report_is_rejected(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,r_t\n1,2\n")
    with pytest.raises(ReportFormatError):
        read_report(bad)


def test_witness_lines(tmp_path):
    witnesses = [
        VacancyWitness(kind="vertex", location=(0.0, 0.0), tuple_indices=(), depth=0),
        VacancyWitness(
            kind="face_critical", location=(0.2, 0.0), tuple_indices=(4,), depth=1, face="x1=lo"
        ),
    ]
    path = write_witnesses(witnesses, tmp_path / "w.jsonl")
    records = [json.loads(line) for line in path.read_text().splitlines()]
    assert records[0] == {"kind": "vertex", "location": [0.0, 0.0], "tuple_indices": [], "depth": 0}
    assert records[1]["face"] == "x1=lo"


def test_samples_file(tmp_path):
    path = write_samples([0.5, -1.25], tmp_path / "s.txt")
    assert [float(v) for v in path.read_text().split()] == [0.5, -1.25]
