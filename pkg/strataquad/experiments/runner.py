"""Config-driven pipeline behind the CLI subcommands.

Resolves a config into a model, densities and schedule, runs the
computations and writes the CSV, SVG and text artifacts.
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from strataquad.asymptotics import analyze, optimal_density_1d, q_function, v_constant
from strataquad.design.densities import Density, UniformDensity, parse_density
from strataquad.design.grids import allocate_uniform, build_design
from strataquad.errors import ConfigError, InvalidArgumentError, SingularityError
from strataquad.experiments.config import ExperimentConfig
from strataquad.experiments.fitting import fit_loglog, fit_scaled, fit_single, rate_stability, scaled_error
from strataquad.experiments.plotting import render_loglog_svg
from strataquad.experiments.schedule import Schedule, ScheduleTable, run_schedule, schedule_from
from strataquad.fields import FieldModel
from strataquad.logging import get_logger, run_context
from strataquad.models import AsymptoticsReport, FitKind, FitReport, SimulationReport
from strataquad.quadrature.mse import exact_mse
from strataquad.quadrature.simulation import simulate_mse

logger = get_logger(__name__)


def fmt(value: Optional[float]) -> str:
    """17-significant-digit float text; empty for None."""
    if value is None:
        return ""
    return format(float(value), ".17g")


@dataclass
class Prediction:
    """One analytic term coefficient * N^-exponent."""

    label: str
    coefficient: float
    exponent: float


@dataclass
class ResolvedExperiment:
    """A config turned into computable objects."""

    config: ExperimentConfig
    model: FieldModel
    densities: Tuple[Density, ...]
    v_optimal: Dict[int, float] = field(default_factory=dict)

    def schedule(self, order: Optional[int] = None) -> Schedule:
        cfg = self.config
        v = None
        if cfg.design.allocation == "optimal":
            v = component_constants(self)
        return schedule_from(
            self.model,
            self.densities,
            cfg.run.N,
            allocation=cfg.design.allocation,
            v=v,
            counts=cfg.design.counts,
            order=order if order is not None else cfg.run.order,
        )


def resolve(config: ExperimentConfig) -> ResolvedExperiment:
    """Build the model and densities of ``config``; 'optimal' densities are computed.

    Raises:
        ConfigError: If the densities do not match the model's components, or
            'optimal' is requested for a component wider than one coordinate.
    """
    model = config.build_model()
    dec = model.decomposition
    specs = config.design.densities
    if len(specs) != dec.k:
        raise ConfigError(f"design.densities: expected {dec.k} entries, got {len(specs)}")
    densities: List[Density] = []
    for j, spec in enumerate(specs):
        if spec == "optimal":
            densities.append(UniformDensity())
            continue
        try:
            densities.append(parse_density(spec))
        except InvalidArgumentError as e:
            raise ConfigError(f"design.densities.{j}: {e}") from e
    v_optimal = {}
    for j, spec in enumerate(specs):
        if spec != "optimal":
            continue
        if dec.l[j] != 1:
            raise ConfigError(
                f"design.densities.{j}: 'optimal' needs a one-dimensional component, l_j = {dec.l[j]}"
            )
        # other 'optimal' components enter Q_j as uniform
        density, v_opt = optimal_density_1d(
            lambda t, j=j, base=tuple(densities): q_function(model, base, dec, j, t),
            model.smoothness.alpha[j],
        )
        densities[j] = density
        v_optimal[j] = v_opt
        logger.info("optimal_density_resolved", component=j, density=repr(density), v_opt=v_opt)
    return ResolvedExperiment(config=config, model=model, densities=tuple(densities), v_optimal=v_optimal)


def component_constants(resolved: ResolvedExperiment) -> List[float]:
    """v_j for every component under the resolved densities."""
    dec = resolved.model.decomposition
    allow = resolved.config.analysis.allow_singular
    return [
        v_constant(resolved.model, resolved.densities, dec, j, allow_singular=allow)
        for j in range(dec.k)
    ]


def predictions(resolved: ResolvedExperiment, report: AsymptoticsReport) -> List[Prediction]:
    """Analytic leading terms of e2 for the configured allocation rule."""
    allocation = resolved.config.design.allocation
    dec = resolved.model.decomposition
    if allocation == "optimal":
        return [Prediction("optimal", report.optimal_constant, report.optimal_rate)]
    if allocation == "uniform":
        return [
            Prediction(f"v{j}", v_j, 1.0 + a_j / dec.d)
            for j, (v_j, a_j) in enumerate(zip(report.v, resolved.model.smoothness.alpha))
        ]
    return []


def write_schedule_csv(table: ScheduleTable, path: Path) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["N", "e2", "err_est", "order", "seconds"])
        for row in table.rows:
            writer.writerow([row.N_actual, fmt(row.e2), fmt(row.err_est), row.order, fmt(row.seconds)])
    return path


def write_per_stratum_csv(schedule: Schedule, table: ScheduleTable, out_dir: Path) -> List[Path]:
    paths = []
    for position, report in enumerate(table.reports):
        design = schedule.design_for(position)
        arrays = design.stratum_arrays()
        path = out_dir / f"per_stratum_N{report.N_actual}.csv"
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow([f"i{m + 1}" for m in range(design.dim)] + ["volume", "e2_i"])
            for index, volume, term in zip(arrays.indices, arrays.volumes, report.per_stratum):
                writer.writerow([int(i) for i in index] + [fmt(volume), fmt(term)])
        paths.append(path)
    return paths


def _params_text(params: Dict[str, float]) -> str:
    return ";".join(f"{key}={fmt(value)}" for key, value in params.items())


def write_fit_csv(fits: Sequence[FitReport], path: Path) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["model", "params", "residual", "n_min", "n_max", "degenerate", "still_trending"])
        for fit in fits:
            writer.writerow(
                [
                    fit.kind.value,
                    _params_text(fit.params),
                    fmt(fit.residual_norm),
                    fit.n_range[0],
                    fit.n_range[1],
                    int(fit.degenerate),
                    int(fit.still_trending),
                ]
            )
    return path


def write_scaled_csv(N: np.ndarray, e2: np.ndarray, p: float, path: Path) -> Path:
    scaled = scaled_error(N, e2, p)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["N", f"N^{fmt(p)}*e2"])
        for n, value in zip(N, scaled):
            writer.writerow([int(n), fmt(value)])
    return path


def write_asymptotics_csv(report: AsymptoticsReport, path: Path) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["quantity", "component", "N_target", "value"])
        for j, value in enumerate(report.v):
            writer.writerow(["v", j, "", fmt(value)])
        for j, value in enumerate(report.v_optimal or []):
            if value is not None:
                writer.writerow(["v_opt", j, "", fmt(value)])
        for j, b in enumerate(report.b_evaluations):
            writer.writerow(["b_tilde", j, "", fmt(b.value)])
            writer.writerow(["b_error", j, "", fmt(b.error_estimate)])
        writer.writerow(["rho", "", "", fmt(report.rho)])
        writer.writerow(["kappa", "", "", fmt(report.kappa)])
        writer.writerow(["optimal_constant", "", "", fmt(report.optimal_constant)])
        writer.writerow(["optimal_rate", "", "", fmt(report.optimal_rate)])
        for row in report.allocations:
            for j, (n, n_real) in enumerate(zip(row.n, row.n_real)):
                writer.writerow(["n_opt", j, row.N_target, n])
                writer.writerow(["n_opt_real", j, row.N_target, fmt(n_real)])
            writer.writerow(["N_actual", "", row.N_target, row.N_actual])
            writer.writerow(["predicted_e2", "", row.N_target, fmt(row.predicted_e2)])
    return path


def write_simulation_csv(rows: Sequence[Tuple[SimulationReport, float]], path: Path) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["N", "estimate", "std_error", "exact_e2", "z_score"])
        for sim, exact in rows:
            z = (sim.estimate - exact) / sim.std_error if sim.std_error > 0 else 0.0
            writer.writerow([sim.N_actual, fmt(sim.estimate), fmt(sim.std_error), fmt(exact), fmt(z)])
    return path


def run_simulations(
    resolved: ResolvedExperiment, seed: int, threads: Optional[int] = None
) -> List[Tuple[SimulationReport, float]]:
    """Simulation oracle next to exact_mse at the config's simulate.N targets."""
    block = resolved.config.simulate
    model = resolved.model
    rows = []
    for N in block.N:
        design = build_design(model.decomposition, resolved.densities, allocate_uniform(N, model.decomposition))
        sim = simulate_mse(
            model,
            design,
            eta_samples=block.eta_samples,
            field_replications=block.replications,
            riemann_refinement=block.refinement,
            seed=seed,
            threads=threads,
        )
        exact = exact_mse(model, design, resolved.config.run.order, threads=threads).e2
        rows.append((sim, exact))
    return rows


@dataclass
class ExperimentResult:
    """Everything an experiment run produced."""

    table: ScheduleTable
    fits: List[FitReport]
    stability: Optional[float]
    analysis: Optional[AsymptoticsReport]
    predictions: List[Prediction]
    notes: List[str]
    simulations: List[Tuple[SimulationReport, float]]
    files: List[Path]


def _scaling_power(resolved: ResolvedExperiment, preds: List[Prediction], single: FitReport) -> float:
    if resolved.config.fit.p is not None:
        return resolved.config.fit.p
    if len(preds) == 1:
        return preds[0].exponent
    return single.params["rate"]


def run_experiment(
    resolved: ResolvedExperiment,
    out_dir: Path,
    seed: int,
    threads: Optional[int] = None,
    order: Optional[int] = None,
    budget: Optional[float] = None,
    timing: bool = False,
    per_stratum: bool = False,
) -> ExperimentResult:
    """Schedule, fits, scaled column, plot, analytic comparison and summary."""
    with run_context(experiment=resolved.config.name, seed=seed):
        logger.info("experiment_started", n_targets=len(resolved.config.run.N), out_dir=str(out_dir))
        return _run_experiment(resolved, out_dir, seed, threads, order, budget, timing, per_stratum)


def _run_experiment(resolved, out_dir, seed, threads, order, budget, timing, per_stratum) -> ExperimentResult:
    cfg = resolved.config
    out_dir.mkdir(parents=True, exist_ok=True)
    schedule = resolved.schedule(order)
    table = run_schedule_for(resolved, schedule, threads, budget, timing, per_stratum)
    files = [write_schedule_csv(table, out_dir / "schedule.csv")]
    if per_stratum:
        files += write_per_stratum_csv(schedule, table, out_dir)

    notes: List[str] = []
    analysis = None
    preds: List[Prediction] = []
    if cfg.analysis.enabled:
        try:
            analysis = analyze(
                resolved.model,
                resolved.densities,
                allow_singular=cfg.analysis.allow_singular,
                optimize_densities=cfg.analysis.optimize_densities,
            )
            preds = predictions(resolved, analysis)
        except SingularityError as e:
            notes.append(f"no analytic constant: {e}")

    N, e2 = table.N, table.e2
    n_min = cfg.fit.n_min
    single = fit_single(N, e2, n_min)
    fits = [single]
    if cfg.fit.kind == FitKind.TWO_POWER:
        fits.append(fit_loglog(N, e2, FitKind.TWO_POWER, exponents=tuple(cfg.fit.exponents), n_min=n_min))
    p = _scaling_power(resolved, preds, single)
    scaled = fit_scaled(N, e2, p, n_min)
    fits.append(scaled)
    files.append(write_fit_csv(fits, out_dir / "fit.csv"))
    files.append(write_scaled_csv(N, e2, p, out_dir / "scaled.csv"))

    stability = None
    try:
        stability = rate_stability(N, e2, n_min)
    except InvalidArgumentError:
        notes.append("too few points for a rate stability check")

    simulations = []
    if cfg.simulate is not None:
        simulations = run_simulations(resolved, seed, threads)
        files.append(write_simulation_csv(simulations, out_dir / "simulation.csv"))

    files.append(render_loglog_svg(N, e2, out_dir / "loglog.svg", fit=fits[-2], title=cfg.name))
    result = ExperimentResult(
        table=table,
        fits=fits,
        stability=stability,
        analysis=analysis,
        predictions=preds,
        notes=notes + [note for fit in fits for note in fit.notes],
        simulations=simulations,
        files=files,
    )
    files.append(write_summary(resolved, result, out_dir / "summary.txt"))
    return result


def run_schedule_for(
    resolved: ResolvedExperiment,
    schedule: Schedule,
    threads: Optional[int] = None,
    budget: Optional[float] = None,
    timing: bool = False,
    per_stratum: bool = False,
) -> ScheduleTable:
    """run_schedule with the config's entry concurrency."""
    return run_schedule(
        schedule,
        threads=threads,
        budget=budget,
        timing=timing,
        per_stratum=per_stratum,
        concurrent_entries=resolved.config.run.concurrent_entries,
    )


def _relative_gap(fitted: float, analytic: float) -> str:
    return f"{(fitted - analytic) / analytic:+.2%}"


def summary_lines(resolved: ResolvedExperiment, result: ExperimentResult) -> List[str]:
    cfg = resolved.config
    lines = [
        f"experiment: {cfg.name}",
        f"model: {resolved.model.name}",
        f"densities: {', '.join(h.spec_string for h in resolved.densities)}",
        f"allocation: {cfg.design.allocation}",
        f"N range: {int(result.table.N[0])}..{int(result.table.N[-1])} ({len(result.table.rows)} points)",
        "",
    ]
    for fit in result.fits:
        params = ", ".join(f"{key}={value:.6g}" for key, value in fit.params.items())
        lines.append(f"fit {fit.kind.value} over N={fit.n_range[0]}..{fit.n_range[1]}: {params}")
    if result.stability is not None:
        lines.append(f"rate change without smallest N: {result.stability:.4f}")
    lines.append("")
    if result.analysis is not None:
        report = result.analysis
        lines.append("analytic constants:")
        lines += [f"  v{j} = {value:.6g}" for j, value in enumerate(report.v)]
        for j, value in enumerate(report.v_optimal or []):
            if value is not None:
                lines.append(f"  v{j} (optimal density) = {value:.6g}")
        lines.append(f"  rho = {report.rho:.6g}, optimal rate = {report.optimal_rate:.6g}")
        lines.append(f"  k*kappa^rho = {report.optimal_constant:.6g}")
    single = result.fits[0]
    for pred in result.predictions:
        lines.append(f"predicted term {pred.label}: {pred.coefficient:.6g} N^-{pred.exponent:.6g}")
    if len(result.predictions) == 1:
        pred = result.predictions[0]
        lines.append(
            f"fitted rate {single.params['rate']:.4f} vs analytic {pred.exponent:.4f}; "
            f"fitted constant {single.params['C']:.6g} vs analytic {pred.coefficient:.6g} "
            f"({_relative_gap(single.params['C'], pred.coefficient)})"
        )
        scaled = result.fits[-1]
        if "C" in scaled.params:
            lines.append(
                f"scaled constant {scaled.params['C']:.6g} vs analytic {pred.coefficient:.6g} "
                f"({_relative_gap(scaled.params['C'], pred.coefficient)})"
            )
        else:
            lines.append(
                f"scaled column last value {scaled.params['last']:.6g} is still moving "
                f"toward the analytic {pred.coefficient:.6g}; it is a finite-N value, not the limit"
            )
            if "projected" in scaled.params:
                lines.append(
                    f"projected limit of the scaled column {scaled.params['projected']:.6g} "
                    f"({_relative_gap(scaled.params['projected'], pred.coefficient)} from analytic)"
                )
    for sim, exact in result.simulations:
        z = (sim.estimate - exact) / sim.std_error if sim.std_error > 0 else 0.0
        lines.append(
            f"simulation N={sim.N_actual}: {sim.estimate:.6g} +- {sim.std_error:.2g} vs exact {exact:.6g} (z={z:+.2f})"
        )
    if result.notes:
        lines.append("")
        lines += [f"note: {note}" for note in result.notes]
    return lines


def write_summary(resolved: ResolvedExperiment, result: ExperimentResult, path: Path) -> Path:
    path.write_text("\n".join(summary_lines(resolved, result)) + "\n", encoding="utf-8")
    return path

