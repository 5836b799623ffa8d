"""Report emission: CSV and JSON study reports, witness JSON lines, raw samples.

Every file is written atomically (temporary file in the target directory,
fsync, rename), so an interrupted run never leaves a truncated report behind.
"""

import csv
import io
import json
import logging
import os
import tempfile
from collections.abc import Iterable
from pathlib import Path
from typing import Literal

from pydantic import ValidationError

from ..core.types import ExperimentConfig, ExperimentReport, ReportRow, VacancyWitness

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "t",
    "r_t",
    "p_hat",
    "std_err",
    "limit_prob",
    "abs_error",
    "mean_F",
    "F_std_err",
    "predicted_mean_F",
    "ks_stat",
    "wall_time_s",
    "degenerate_resamples",
)

_CONFIG_PREFIX = "# config: "
_WARNING_PREFIX = "# warning: "


class ReportFormatError(Exception):
    """Raised when a report file does not parse under the report schema."""

    pass


def atomic_write_text(path: Path, text: str) -> None:
    """Replace `path` with `text` in one rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = None
    try:
        with tempfile.NamedTemporaryFile(
            "w", delete=False, dir=path.parent, encoding="utf-8", suffix=".tmp", newline=""
        ) as f:
            tmp_path = f.name
            f.write(text)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp_path, path)
    except OSError as e:
        logger.error(f"Failed to write {path}: {e}")
        if tmp_path and os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
    logger.info(f"Wrote {path} ({len(text)} bytes)")


def _cell(value: float | int | None) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(report: ExperimentReport) -> str:
    """CSV text: config and warning comment lines, then one row per t."""
    buf = io.StringIO()
    buf.write(_CONFIG_PREFIX + report.config.model_dump_json() + "\n")
    for warning in report.warnings:
        buf.write(_WARNING_PREFIX + warning.replace("\n", " ") + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in report.rows:
        writer.writerow([_cell(getattr(row, col)) for col in CSV_COLUMNS])
    return buf.getvalue()


def render_json(report: ExperimentReport) -> str:
    return report.model_dump_json(indent=2) + "\n"


def write_report(
    report: ExperimentReport, path: Path, fmt: Literal["csv", "json"] = "csv"
) -> Path:
    text = render_csv(report) if fmt == "csv" else render_json(report)
    atomic_write_text(path, text)
    return path


def _parse_csv(text: str) -> ExperimentReport:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(_CONFIG_PREFIX):
        raise ReportFormatError("missing '# config:' header line")
    config = ExperimentConfig.model_validate_json(lines[0][len(_CONFIG_PREFIX) :])
    body = 1
    warnings = []
    while body < len(lines) and lines[body].startswith(_WARNING_PREFIX):
        warnings.append(lines[body][len(_WARNING_PREFIX) :])
        body += 1

    reader = csv.DictReader(lines[body:])
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ReportFormatError(f"unexpected columns {reader.fieldnames}")
    rows = [
        ReportRow.model_validate({k: (v if v != "" else None) for k, v in rec.items()})
        for rec in reader
    ]
    return ExperimentReport(config=config, rows=rows, warnings=warnings)


def read_report(path: Path) -> ExperimentReport:
    """Parse a CSV or JSON report written by `write_report`.

    Threshold samples and the rate fit only survive the JSON form.

    Raises:
        ReportFormatError: If the file does not match the report schema.

    """
    text = path.read_text(encoding="utf-8")
    try:
        if path.suffix == ".json":
            return ExperimentReport.model_validate_json(text)
        return _parse_csv(text)
    except (ValidationError, ValueError) as e:
        raise ReportFormatError(f"{path}: {e}") from e


def write_witnesses(witnesses: Iterable[VacancyWitness], path: Path) -> Path:
    """One JSON object per line: kind, location, tuple_indices, depth (and face)."""
    lines = [
        json.dumps(w.model_dump(mode="json", exclude_none=True), separators=(",", ":"))
        for w in witnesses
    ]
    atomic_write_text(path, "".join(line + "\n" for line in lines))
    return path


def write_samples(samples: Iterable[float], path: Path) -> Path:
    """Raw values, one per line, for external plotting."""
    atomic_write_text(path, "".join(f"{float(s)!r}\n" for s in samples))
    return path
