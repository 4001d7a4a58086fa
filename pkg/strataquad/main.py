"""Command-line interface: exact MSE, asymptotic constants, allocations and experiments.

Every command reads an experiment config, prints a rich summary and writes
CSV results; errors map to the EXIT_* status codes.
"""

import csv
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, List, Optional

import numpy as np
import typer
from rich.console import Console
from rich.table import Table

from strataquad.asymptotics import (
    analyze,
    optimal_density_1d,
    predicted_mse,
    q_function,
    singularity_diagnostics,
    v_constant,
)
from strataquad.config import settings
from strataquad.design.grids import allocate_optimal, allocate_uniform
from strataquad.errors import (
    BudgetExceededError,
    ConfigError,
    DomainError,
    StrataquadError,
)
from strataquad.experiments.config import ExperimentConfig, load_config
from strataquad.experiments.runner import (
    ResolvedExperiment,
    component_constants,
    fmt,
    resolve,
    run_experiment,
    run_schedule_for,
    write_asymptotics_csv,
    write_per_stratum_csv,
    write_schedule_csv,
)
from strataquad.experiments.schedule import projected_schedule_cost
from strataquad.logging import configure_logging

app = typer.Typer(add_completion=False, help="Exact MSE and asymptotics of stratified Monte Carlo quadrature.")
console = Console()

EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_DOMAIN = 4

# Initialize structured logging
configure_logging(
    log_level=settings.STRATAQUAD_LOG_LEVEL,
    log_format=settings.STRATAQUAD_LOG_FORMAT,
)

ConfigArgument = typer.Argument(None, help="Experiment config (TOML)")
ConfigOption = typer.Option(None, "--config", "-c", help="Experiment config (TOML)")
OutOption = typer.Option(None, "--out", "-o", help="Output directory; defaults to run.out")
ThreadsOption = typer.Option(None, "--threads", min=1, help="Worker threads; defaults to STRATAQUAD_THREADS")
OrderOption = typer.Option(None, "--order", min=3, help="Cubature order per dimension")


@contextmanager
def exit_codes() -> Iterator[None]:
    """Map library errors to the CLI exit codes."""
    try:
        yield
    except ConfigError as e:
        console.print(f"[red]Config error: {e}[/red]")
        raise typer.Exit(code=EXIT_CONFIG)
    except BudgetExceededError as e:
        console.print(f"[red]{e}[/red]")
        console.print(f"[yellow]Projected kernel evaluations: {e.projected}[/yellow]")
        raise typer.Exit(code=EXIT_BUDGET)
    except DomainError as e:
        console.print(f"[red]Domain error: {e}[/red]")
        raise typer.Exit(code=EXIT_DOMAIN)
    except StrataquadError as e:
        console.print(f"[red]Error: {e}[/red]")
        raise typer.Exit(code=EXIT_FAILURE)


def _load(config: Optional[Path], config_opt: Optional[Path]) -> ExperimentConfig:
    path = config_opt or config
    if path is None:
        raise ConfigError("no config given; pass a path or --config")
    return load_config(path)


def _out_dir(cfg: ExperimentConfig, out: Optional[Path]) -> Path:
    path = Path(out) if out is not None else Path(cfg.run.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _dry_run(resolved: ResolvedExperiment, order: Optional[int]) -> None:
    schedule = resolved.schedule(order)
    costs = projected_schedule_cost(schedule)
    table = Table(title=f"Projected cost: {resolved.config.name}")
    table.add_column("N_target", justify="right")
    table.add_column("N_actual", justify="right")
    table.add_column("kernel evaluations", justify="right")
    for position, cost in enumerate(costs):
        table.add_row(
            str(schedule.N_targets[position]),
            str(schedule.allocation_for(position).N_actual),
            f"{cost:,}",
        )
    console.print(table)
    total = sum(costs)
    console.print(f"Total: {total:,} (budget per call {settings.STRATAQUAD_BUDGET:,.0f})")
    over = [c for c in costs if c > settings.STRATAQUAD_BUDGET]
    if over:
        console.print(f"[yellow]{len(over)} entries exceed the budget and would be refused[/yellow]")


@app.command()
def mse(
    config: Optional[Path] = ConfigArgument,
    config_opt: Optional[Path] = ConfigOption,
    out: Optional[Path] = OutOption,
    threads: Optional[int] = ThreadsOption,
    order: Optional[int] = OrderOption,
    dry_run: bool = typer.Option(False, "--dry-run", help="Print projected cost and exit"),
    per_stratum: bool = typer.Option(False, "--per-stratum", help="Also write per-stratum contributions"),
    timing: bool = typer.Option(False, "--timing", help="Fill the seconds column"),
):
    """Exact MSE over the config's N schedule, written to schedule.csv."""
    with exit_codes():
        cfg = _load(config, config_opt)
        resolved = resolve(cfg)
        if dry_run:
            _dry_run(resolved, order)
            return
        out_dir = _out_dir(cfg, out)
        schedule = resolved.schedule(order)
        table = run_schedule_for(
            resolved,
            schedule,
            threads=threads,
            budget=settings.STRATAQUAD_BUDGET,
            timing=timing,
            per_stratum=per_stratum,
        )
        path = write_schedule_csv(table, out_dir / "schedule.csv")
        if per_stratum:
            write_per_stratum_csv(schedule, table, out_dir)

    view = Table(title=f"Exact MSE: {cfg.name}")
    for column in ("N", "e2", "err_est", "order"):
        view.add_column(column, justify="right")
    for row in table.rows:
        view.add_row(str(row.N_actual), f"{row.e2:.6e}", f"{row.err_est:.2e}", str(row.order))
    console.print(view)
    console.print(f"[bold green]Schedule saved to {path}[/bold green]")


@app.command()
def asymptotics(
    config: Optional[Path] = ConfigArgument,
    config_opt: Optional[Path] = ConfigOption,
    out: Optional[Path] = OutOption,
):
    """v_j, rho, kappa, optimal allocations and optimal 1-d densities."""
    with exit_codes():
        cfg = _load(config, config_opt)
        resolved = resolve(cfg)
        report = analyze(
            resolved.model,
            resolved.densities,
            N_targets=cfg.run.N or (),
            allow_singular=cfg.analysis.allow_singular,
            optimize_densities=True,
        )
        path = write_asymptotics_csv(report, _out_dir(cfg, out) / "asymptotics.csv")

    view = Table(title=f"Asymptotics: {cfg.name}")
    view.add_column("quantity")
    view.add_column("value", justify="right")
    for j, value in enumerate(report.v):
        view.add_row(f"v{j}", f"{value:.6g}")
    for j, value in enumerate(report.v_optimal or []):
        if value is not None:
            view.add_row(f"v{j} (optimal density)", f"{value:.6g}")
    view.add_row("rho", f"{report.rho:.6g}")
    view.add_row("kappa", f"{report.kappa:.6g}")
    view.add_row("k*kappa^rho", f"{report.optimal_constant:.6g}")
    view.add_row("optimal rate", f"{report.optimal_rate:.6g}")
    console.print(view)
    for warning in report.warnings:
        console.print(f"[yellow]Warning: {warning}[/yellow]")
    console.print(f"[bold green]Asymptotics saved to {path}[/bold green]")


@app.command()
def allocate(
    config: Optional[Path] = ConfigArgument,
    config_opt: Optional[Path] = ConfigOption,
    out: Optional[Path] = OutOption,
    n_target: Optional[List[int]] = typer.Option(None, "--N", help="Target N; repeatable, defaults to run.N"),
):
    """Uniform and optimal allocations with their predicted MSE."""
    with exit_codes():
        cfg = _load(config, config_opt)
        resolved = resolve(cfg)
        model = resolved.model
        dec = model.decomposition
        v = component_constants(resolved)
        targets = n_target or cfg.run.N or []
        rows = []
        for N in targets:
            for rule, alloc in (
                ("uniform", allocate_uniform(N, dec)),
                ("optimal", allocate_optimal(v, model.smoothness, dec, N)),
            ):
                rows.append((N, rule, alloc, predicted_mse(v, model.smoothness, dec, alloc)))
        path = _out_dir(cfg, out) / "allocation.csv"
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["N_target", "rule", "n", "N_actual", "predicted_e2"])
            for N, rule, alloc, predicted in rows:
                writer.writerow([N, rule, "x".join(map(str, alloc.n)), alloc.N_actual, fmt(predicted)])

    view = Table(title=f"Allocations: {cfg.name}")
    for column in ("N_target", "rule", "n", "N_actual", "predicted e2"):
        view.add_column(column, justify="right")
    for N, rule, alloc, predicted in rows:
        view.add_row(str(N), rule, "x".join(map(str, alloc.n)), str(alloc.N_actual), f"{predicted:.6e}")
    console.print(view)
    console.print(f"[bold green]Allocations saved to {path}[/bold green]")


@app.command("density-opt")
def density_opt(
    config: Optional[Path] = ConfigArgument,
    config_opt: Optional[Path] = ConfigOption,
    out: Optional[Path] = OutOption,
    component: int = typer.Option(0, "--component", "-j", help="One-dimensional component index (0-based)"),
):
    """Optimal density for one component and its constant against the configured one."""
    with exit_codes():
        cfg = _load(config, config_opt)
        resolved = resolve(cfg)
        model = resolved.model
        dec = model.decomposition
        density, v_opt = optimal_density_1d(
            lambda t: q_function(model, resolved.densities, dec, component, t),
            model.smoothness.alpha[component],
        )
        v_current = v_constant(
            model, resolved.densities, dec, component, allow_singular=cfg.analysis.allow_singular
        )
        t = (np.arange(100) + 0.5) / 100
        path = _out_dir(cfg, out) / f"density_{component}.csv"
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["t", "pdf", "cdf", "quantile"])
            for t_i, pdf, cdf, quantile in zip(t, density.pdf(t), density.cdf(t), density.quantile(t)):
                writer.writerow([fmt(t_i), fmt(pdf), fmt(cdf), fmt(quantile)])

    console.print(f"Optimal density: [bold]{density!r}[/bold]")
    console.print(f"v{component} with {resolved.densities[component].spec_string}: {v_current:.6g}")
    console.print(f"v{component} with the optimal density: {v_opt:.6g}")
    console.print(f"[bold green]Density table saved to {path}[/bold green]")


@app.command()
def experiment(
    config: Optional[Path] = ConfigArgument,
    config_opt: Optional[Path] = ConfigOption,
    out: Optional[Path] = OutOption,
    threads: Optional[int] = ThreadsOption,
    order: Optional[int] = OrderOption,
    seed: Optional[int] = typer.Option(None, "--seed", help="Seed for the simulation cross-check"),
    dry_run: bool = typer.Option(False, "--dry-run", help="Print projected cost and exit"),
    per_stratum: bool = typer.Option(False, "--per-stratum", help="Also write per-stratum contributions"),
    timing: bool = typer.Option(False, "--timing", help="Fill the seconds column"),
):
    """Full experiment: schedule, fits, analytic comparison, plot and summary."""
    with exit_codes():
        cfg = _load(config, config_opt)
        resolved = resolve(cfg)
        if dry_run:
            _dry_run(resolved, order)
            return
        console.print(f"[bold blue]Running {cfg.name} over {len(cfg.run.N)} N values...[/bold blue]")
        result = run_experiment(
            resolved,
            _out_dir(cfg, out),
            seed=cfg.run.seed if seed is None else seed,
            threads=threads,
            order=order,
            budget=settings.STRATAQUAD_BUDGET,
            timing=timing,
            per_stratum=per_stratum,
        )

    summary = result.files[-1]
    console.print(summary.read_text(encoding="utf-8"), markup=False)
    for path in result.files:
        console.print(f"[dim]wrote {path}[/dim]")


@app.command("diagnose-singularity")
def diagnose_singularity(
    config: Optional[Path] = ConfigArgument,
    config_opt: Optional[Path] = ConfigOption,
    out: Optional[Path] = OutOption,
    component: int = typer.Option(0, "--component", "-j", help="Component index (0-based)"),
):
    """Growth and shifting diagnostics of the design density near the origin."""
    with exit_codes():
        cfg = _load(config, config_opt)
        resolved = resolve(cfg)
        model = resolved.model
        if model.holder is None:
            raise ConfigError(f"model '{model.name}' has no Hölder data; set model.holder")
        bound = None
        if model.local_stationarity_c is not None:
            c_j = model.local_stationarity_c[component]
            direction = np.ones(model.dim) / np.sqrt(model.dim)
            bound = lambda r: c_j(np.asarray(r)[:, None] * direction[None, :])  # noqa: E731
        report = singularity_diagnostics(
            resolved.densities[component].quantile,
            model.smoothness.alpha[component],
            model.holder.beta,
            bound=bound,
            dim=model.dim,
        )
        path = _out_dir(cfg, out) / "singularity.csv"
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["s", "ratio"])
            for s, ratio in zip(report.s_values, report.ratios):
                writer.writerow([fmt(s), fmt(ratio)])

    console.print(f"Threshold exponent: {report.exponent:.6g}")
    console.print(f"Log-log slope of G(s)/s^exponent: {report.slope:.4f} ({report.trend.value})")
    if report.condition_holds:
        console.print("[green]Growth condition holds: G(s)/s^exponent decreases toward 0.[/green]")
    else:
        console.print("[yellow]Growth condition not confirmed on s = 1e-1 .. 1e-8.[/yellow]")
    if report.shifting_ratio is not None:
        low, up = report.shifting_bounds
        console.print(f"Shifting ratio sup f(s)/f(v) over |s|/|v| in [{low:.4g}, {up:.4g}]: {report.shifting_ratio:.6g}")
    console.print(f"[bold green]Diagnostics saved to {path}[/bold green]")


if __name__ == "__main__":
    app()
