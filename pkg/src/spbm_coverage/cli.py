"""Command Line Interface for the coverage lab."""

import json
import logging
from enum import Enum
from pathlib import Path
from typing import Annotated, Any

import typer
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from spbm_coverage.config import ConfigLoadError, LabSettings, load_run_config
from spbm_coverage.core.laws import ModelConfigError, parse_law
from spbm_coverage.core.model import (
    alpha,
    constant_c0,
    constant_cdkY,
    hall_janson_radius,
    limit_probability,
    moment_conditions,
    predicted_mean_witnesses,
    scaling_radius,
    theta,
    truncation_exponent,
    vacancy_probability,
)
from spbm_coverage.core.types import (
    ExperimentConfig,
    ExperimentReport,
    ScalingSchedule,
    SuiteResult,
)
from spbm_coverage.tools.experiment import (
    ExperimentError,
    ReplicationSettings,
    replication_witnesses,
    run_experiment,
)
from spbm_coverage.tools.verify import verify_constants, verify_oracle, verify_predicates
from spbm_coverage.utils.reports import write_report, write_samples, write_witnesses

# --- Setup ---

app = typer.Typer(
    name="spbm-cli",
    help="Exact coverage checks and Monte Carlo studies for spherical Poisson Boolean models.",
    add_completion=False,
)
console = Console()


class OutputFormat(str, Enum):
    csv = "csv"
    json = "json"


class TableFormat(str, Enum):
    table = "table"
    json = "json"


class Suite(str, Enum):
    predicates = "predicates"
    oracle = "oracle"
    constants = "constants"


@app.callback()
def main(
    verbose: Annotated[
        bool, typer.Option("--verbose", "-v", help="Enable verbose logging.")
    ] = False,
) -> None:
    """Spherical Poisson Boolean model coverage lab."""
    log_level = logging.DEBUG if verbose else LabSettings().log_level
    logging.basicConfig(level=log_level)


# --- Constants ---


@app.command("constants")
def cmd_constants(
    d: Annotated[int, typer.Option("--d", help="Dimension (>= 2).")] = 2,
    k: Annotated[int, typer.Option("--k", help="Coverage multiplicity (>= 1).")] = 1,
    law: Annotated[
        str, typer.Option("--law", help="Radius law: det:<c>, unif:<a>:<b>, disc:<v>@<w>,...")
    ] = "det:1",
    beta: Annotated[float, typer.Option("--beta", help="Schedule shift beta.")] = 0.0,
    area: Annotated[float, typer.Option("--area", help="Volume of the region A.")] = 1.0,
    t: Annotated[
        float | None, typer.Option("--t", help="Also evaluate finite-t quantities.")
    ] = None,
    fmt: Annotated[TableFormat, typer.Option("--format")] = TableFormat.table,
) -> None:
    """Print theta_d, alpha, c_{d,k,Y}, c_0 and the limit probability."""
    if d < 2:
        raise typer.BadParameter("d must be at least 2", param_hint="--d")
    if k < 1:
        raise typer.BadParameter("k must be at least 1", param_hint="--k")
    if area < 0:
        raise typer.BadParameter("area must be non-negative", param_hint="--area")
    try:
        radius_law = parse_law(law)
    except ModelConfigError as e:
        raise typer.BadParameter(str(e), param_hint="--law") from e

    sched = ScalingSchedule(d=d, k=k, beta=beta)
    values: dict[str, Any] = {
        "d": d,
        "k": k,
        "law": radius_law.spec(),
        "beta": beta,
        "area": area,
        "theta_d": theta(d),
        "alpha": alpha(d, radius_law),
        "c_dkY": constant_cdkY(d, k, radius_law),
        "c_0": constant_c0(d, radius_law),
        "limit_prob": limit_probability(sched, radius_law, area),
        "zeta": truncation_exponent(d, radius_law),
        "moment_conditions": moment_conditions(radius_law, d),
    }
    if t is not None:
        if t <= 1:
            raise typer.BadParameter("t must exceed 1", param_hint="--t")
        r_t = scaling_radius(t, sched, radius_law)
        finite, _ = predicted_mean_witnesses(t, sched, radius_law, area)
        values.update(
            {
                "t": t,
                "r_t": r_t,
                "r_t_hall_janson": hall_janson_radius(t, sched, radius_law),
                "vacancy_prob": vacancy_probability(t, r_t, radius_law, k, d),
                "mean_F_finite_t": finite,
            }
        )

    if fmt == TableFormat.json:
        console.print_json(json.dumps(values))
        return

    table = Table(title=f"Constants (d={d}, k={k}, {radius_law.spec()})")
    table.add_column("Quantity", style="cyan")
    table.add_column("Value", style="white")
    for name, value in values.items():
        text = f"{value:.10g}" if isinstance(value, float) else str(value)
        table.add_row(name, text)
    console.print(table)


# --- Run ---


def _apply_overrides(cfg: ExperimentConfig, **overrides: Any) -> ExperimentConfig:
    updates = {key: value for key, value in overrides.items() if value is not None}
    if not updates:
        return cfg
    return ExperimentConfig.model_validate({**cfg.model_dump(), **updates})


def _print_rows(report: ExperimentReport) -> None:
    table = Table(title=f"{report.config.study} study")
    columns = ("t", "r_t", "p_hat", "std_err", "limit_prob", "mean_F", "ks_stat")
    for col in columns:
        table.add_column(col, style="cyan" if col == "t" else "white")
    for row in report.rows:
        cells = [getattr(row, col) for col in columns]
        table.add_row(*("-" if v is None else f"{v:.6g}" for v in cells))
    console.print(table)
    if report.rate_fit is not None:
        fit = report.rate_fit
        slope = "indeterminate" if fit.slope is None else f"{fit.slope:.4g}"
        console.print(f"[bold]Rate slope vs 1/log t:[/bold] {slope}")
    for warning in report.warnings:
        console.print(f"[yellow]Warning:[/yellow] {warning}")


@app.command("run")
def cmd_run(
    config: Annotated[Path, typer.Option("--config", help="JSON run config.")],
    seed: Annotated[
        int | None, typer.Option("--seed", help="Override the master seed.")
    ] = None,
    workers: Annotated[
        int | None, typer.Option("--workers", help="Override the worker count.")
    ] = None,
    fmt: Annotated[
        OutputFormat | None, typer.Option("--format", help="Report format.")
    ] = None,
    out: Annotated[Path | None, typer.Option("--out", help="Report path.")] = None,
) -> None:
    """Run the study described by a config file and write its report."""
    settings = LabSettings()
    try:
        run_config = load_run_config(config)
        if workers is None and "workers" not in run_config.experiment.model_fields_set:
            workers = settings.workers
        cfg = _apply_overrides(
            run_config.experiment,
            master_seed=seed,
            workers=workers,
        )
    except ConfigLoadError as e:
        for message in e.messages:
            console.print(f"[bold red]Config error:[/bold red] {message}")
        raise typer.Exit(code=2) from e
    except ValidationError as e:
        console.print(f"[bold red]Config error:[/bold red] {e}")
        raise typer.Exit(code=2) from e

    output = run_config.output
    report_format = fmt.value if fmt is not None else output.format
    target = out or output.path or settings.output_dir / f"report.{report_format}"

    console.print(
        f"[bold blue]Running {cfg.study} study[/bold blue] "
        f"(seed={cfg.master_seed}, M={cfg.replications}, workers={cfg.workers})"
    )
    replication = ReplicationSettings.from_settings(settings)
    try:
        report = run_experiment(cfg, replication)
        write_report(report, target, report_format)
        if output.samples_path is not None and report.threshold_samples:
            samples = [s for block in report.threshold_samples for s in block.samples]
            write_samples(samples, output.samples_path)
        if output.witnesses_path is not None:
            write_witnesses(replication_witnesses(cfg, settings=replication), output.witnesses_path)
    except (ExperimentError, ModelConfigError, ValueError, OSError) as e:
        console.print(f"[bold red]Error:[/bold red] {e}")
        raise typer.Exit(code=1) from e

    _print_rows(report)
    console.print(f"[green]Report written to {target}[/green]")


# --- Verify ---


def _print_suite(result: SuiteResult) -> None:
    table = Table(title=f"Verification: {result.suite}")
    table.add_column("Check", style="cyan")
    table.add_column("Status", style="white")
    table.add_column("Margin", style="white")
    table.add_column("Detail", style="dim")
    for check in result.checks:
        status = "[green]pass[/green]" if check.passed else "[red]FAIL[/red]"
        margin = "-" if check.margin is None else f"{check.margin:.4g}"
        table.add_row(check.name, status, margin, check.detail)
    console.print(table)


@app.command("verify")
def cmd_verify(
    suite: Annotated[Suite, typer.Argument(help="Suite to run.")],
    n: Annotated[
        int | None, typer.Option("--n", help="Configurations or Monte Carlo samples.")
    ] = None,
    d: Annotated[int | None, typer.Option("--d", help="Restrict to one dimension.")] = None,
    instances: Annotated[
        int, typer.Option("--instances", help="Oracle instances.")
    ] = 1000,
    resolution: Annotated[
        int, typer.Option("--resolution", help="Oracle lattice nodes per axis.")
    ] = 1024,
    seed: Annotated[int, typer.Option("--seed", help="Master seed.")] = 0,
    runs: Annotated[
        int,
        typer.Option(
            "--runs",
            min=1,
            help="Independent Monte Carlo runs per constant; 99% must land within 3 sigma.",
        ),
    ] = 1,
) -> None:
    """Run a cross-validation suite; exit 1 if any check fails."""
    tol = LabSettings().tolerance
    if d is not None and d < 2:
        raise typer.BadParameter("d must be at least 2", param_hint="--d")

    if suite == Suite.predicates:
        dims = [d] if d is not None else [2, 3]
        result = SuiteResult(suite="predicates")
        for dim in dims:
            part = verify_predicates(n or 100_000, dim, seed, tol=tol)
            result.checks.extend(part.checks)
    elif suite == Suite.constants:
        result = verify_constants(d, n or 1_000_000, seed, runs)
    else:
        result = verify_oracle(instances, seed, resolution, tol)

    _print_suite(result)
    if not result.passed:
        failed = [c.name for c in result.checks if not c.passed]
        console.print(f"[bold red]Failed checks:[/bold red] {', '.join(failed)}")
        raise typer.Exit(code=1)
    console.print("[green]All checks passed.[/green]")


if __name__ == "__main__":
    app()
