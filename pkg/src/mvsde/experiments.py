"""The three experiment pipelines and their CSV artifacts.

Each ``run_*`` function computes everything first and only then writes
files, so the output is independent of evaluation order.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.stats

from .analysis import (
    KsResult,
    RatePlan,
    RateReport,
    fit_rate,
    ks_test,
    rate_limit,
    strong_error,
)
from .config import ExperimentConfig, config_to_text
from .euler import ConstantDrift, DriftEvaluator, EnsembleResult, EulerPathError, simulate_ensemble
from .fokker_planck import FpDiagnostics, FpSolverError, NonlinearF, density_cdf, solve_fp
from .grid import GridFunction, SpaceTimeField, SpatialGrid, make_uniform_grid, write_grid_function_csv
from .mollifier import MollifierSpec, mollify_drift
from .randproc import TAG_FBM, SeedSpec, fbm_on_grid

log = logging.getLogger(__name__)

MASS_GATE = 1e-4
POSITIVITY_GATE = -1e-3
DEGENERATE_ERROR = 1e-12


class NumericalFailure(RuntimeError):
    pass


def space_grid(cfg: ExperimentConfig) -> SpatialGrid:
    return make_uniform_grid(-cfg.L, cfg.L, cfg.n_space)


def smoothing_levels(cfg: ExperimentConfig) -> dict[int, float]:
    """``N(m)`` for every coarse level and the reference."""
    plan = RatePlan(cfg.beta, cfg.lam)
    return {m: plan.N(m) for m in (*cfg.levels, cfg.m_ref)}


def initial_density(grid: SpatialGrid) -> GridFunction:
    rho = scipy.stats.norm.pdf(grid.nodes)
    rho[0] = rho[-1] = 0.0
    return GridFunction(grid, rho)


def generate_h(cfg: ExperimentConfig, Ns, run: int = 0) -> GridFunction:
    """fBm path on the space grid enlarged by the widest kernel support needed."""
    grid = space_grid(cfg)
    margin = max(MollifierSpec(N).support_nodes(grid.dx) for N in Ns)
    stream = 0 if cfg.fixed_drift else run
    return fbm_on_grid(SeedSpec(cfg.seed, stream, (TAG_FBM,)), cfg.hurst, grid.extend(margin))


def check_fp_gates(diag: FpDiagnostics, label: str = "") -> None:
    if diag.max_mass_deviation >= MASS_GATE:
        raise NumericalFailure(f"{label}: mass deviation {diag.max_mass_deviation:.3g} breaches {MASS_GATE:g}")
    if diag.min_value <= POSITIVITY_GATE:
        raise NumericalFailure(f"{label}: density minimum {diag.min_value:.3g} breaches {POSITIVITY_GATE:g}")


@dataclass
class LevelDrift:
    N: float
    bN: GridFunction
    field: SpaceTimeField | None
    diagnostics: FpDiagnostics | None
    evaluator: object


def build_level_drift(cfg: ExperimentConfig, h: GridFunction, N: float, F: NonlinearF, field=None) -> LevelDrift:
    grid = space_grid(cfg)
    bN = mollify_drift(h, MollifierSpec(N), grid)
    diag = None
    if field is None:
        field, diag = solve_fp(initial_density(grid), bN, F, cfg.T, cfg.pde)
        check_fp_gates(diag, f"N={N:g}")
    return LevelDrift(N, bN, field, diag, DriftEvaluator(field, bN, F, N))


# ---------------------------------------------------------------- drift-gen


@dataclass
class DriftGenResult:
    h: GridFunction
    drifts: dict[float, GridFunction]
    cfg: ExperimentConfig

    def write(self, out: Path) -> list[Path]:
        out.mkdir(parents=True, exist_ok=True)
        files = [out / "fbm_path.csv", out / "drift.csv", out / "config_echo.ini"]
        write_grid_function_csv(files[0], self.h, "h")
        grid = next(iter(self.drifts.values())).grid
        h_inner = np.interp(grid.nodes, self.h.grid.nodes, self.h.values)
        cols = [grid.nodes, h_inner] + [self.drifts[N].values for N in sorted(self.drifts)]
        header = "x,h," + ",".join(f"bN_{N:g}" for N in sorted(self.drifts))
        np.savetxt(files[1], np.column_stack(cols), delimiter=",", header=header, comments="", fmt="%.17g")
        files[2].write_text(config_to_text(self.cfg))
        return files


def run_drift_gen(cfg: ExperimentConfig) -> DriftGenResult:
    Ns = sorted(set(smoothing_levels(cfg).values()))
    h = generate_h(cfg, Ns)
    grid = space_grid(cfg)
    return DriftGenResult(h, {N: mollify_drift(h, MollifierSpec(N), grid) for N in Ns}, cfg)


# ---------------------------------------------------------- density-compare


@dataclass
class DensityCase:
    F: NonlinearF
    N: float
    rho_T: GridFunction | None
    terminal: np.ndarray
    ks: KsResult
    diagnostics: FpDiagnostics | None
    ks_analytic: KsResult | None = None


@dataclass
class DensityCompareResult:
    cases: list[DensityCase]
    cfg: ExperimentConfig

    def write(self, out: Path) -> list[Path]:
        out.mkdir(parents=True, exist_ok=True)
        files = []
        rows = []
        for i, c in enumerate(self.cases):
            sub = out / f"F{i}_{c.F.label}"
            sub.mkdir(exist_ok=True)
            if c.rho_T is not None:
                write_grid_function_csv(sub / "rho_T.csv", c.rho_T, "rho")
                files.append(sub / "rho_T.csv")
            if c.diagnostics is not None:
                (sub / "fp_diagnostics.txt").write_text(c.diagnostics.as_text())
                files.append(sub / "fp_diagnostics.txt")
            _write_column(sub / "terminal_ref.csv", c.terminal)
            files.append(sub / "terminal_ref.csv")
            rows.append([i, c.F.label, "pde", self.cfg.m_ref, repr(c.N), repr(c.ks.statistic), repr(c.ks.p_value), c.ks.n])
            if c.ks_analytic is not None:
                a = c.ks_analytic
                rows.append([i, c.F.label, "analytic", self.cfg.m_ref, repr(c.N), repr(a.statistic), repr(a.p_value), a.n])
        ks_path = out / "ks.csv"
        _write_rows(ks_path, ["F_index", "F", "reference_law", "m", "N", "statistic", "p_value", "n"], rows)
        (out / "config_echo.ini").write_text(config_to_text(self.cfg))
        return [ks_path, out / "config_echo.ini", *files]


def _analytic_cdf(cfg: ExperimentConfig):
    c = cfg.drift_constant if cfg.drift_override == "constant" else 0.0
    return scipy.stats.norm(loc=c * cfg.T, scale=math.sqrt(1.0 + cfg.T)).cdf


def run_density_compare(cfg: ExperimentConfig) -> DensityCompareResult:
    """Terminal law of the reference Euler level against the PDE density at ``T``."""
    N = smoothing_levels(cfg)[cfg.m_ref]
    cases = []
    h = None if cfg.drift_override != "none" else generate_h(cfg, [N])
    grid = space_grid(cfg)
    for F in cfg.F:
        if cfg.drift_override == "constant":
            ens = simulate_ensemble(cfg, {}, ConstantDrift(cfg.drift_constant, N))
            term = ens.reference.terminal
            cases.append(DensityCase(F, N, None, term, ks_test(term, _analytic_cdf(cfg)), None))
            continue
        if cfg.drift_override == "zero":
            bN = GridFunction(grid, np.zeros(grid.n))
            field, diag = solve_fp(initial_density(grid), bN, F, cfg.T, cfg.pde)
            check_fp_gates(diag, "zero drift")
            lvl = LevelDrift(N, bN, field, diag, ConstantDrift(0.0, N))
        else:
            lvl = build_level_drift(cfg, h, N, F)
        ens = simulate_ensemble(cfg, {}, lvl.evaluator)
        term = ens.reference.terminal
        rho_T = lvl.field.row(lvl.field.times.size - 1)
        ks = ks_test(term, density_cdf(rho_T))
        analytic = ks_test(term, _analytic_cdf(cfg)) if cfg.drift_override == "zero" else None
        log.info("density-compare %s: D=%.4g p=%.4g", F.label, ks.statistic, ks.p_value)
        cases.append(DensityCase(F, N, rho_T, term, ks, lvl.diagnostics, analytic))
    return DensityCompareResult(cases, cfg)


# --------------------------------------------------------------- rate-sweep


@dataclass
class RunOutcome:
    run: int
    Ns: dict[int, float]
    errors: dict[int, float]
    report: RateReport | None
    degenerate: bool
    ensemble: EnsembleResult


@dataclass
class RateSweepResult:
    runs: list[RunOutcome]
    cfg: ExperimentConfig
    kappa: float
    theoretical_rate: float
    rate_limit: float
    fp_diagnostics: dict = field(default_factory=dict)

    @property
    def rates(self) -> np.ndarray:
        return np.array([r.report.rate for r in self.runs if not r.degenerate])

    @property
    def mean_rate(self) -> float:
        r = self.rates
        return float(r.mean()) if r.size else math.nan

    @property
    def half_width(self) -> float:
        r = self.rates
        if r.size < 2:
            return math.nan
        return float(1.96 * r.std(ddof=1) / math.sqrt(r.size))

    def write(self, out: Path) -> list[Path]:
        out.mkdir(parents=True, exist_ok=True)
        err_rows, rate_rows = [], []
        for r in self.runs:
            for m in sorted(r.errors):
                err_rows.append([r.run, m, repr(r.Ns[m]), repr(self.kappa), repr(r.errors[m])])
            rate = repr(r.report.rate) if r.report and not r.degenerate else "nan"
            icpt = repr(r.report.intercept) if r.report and not r.degenerate else "nan"
            rate_rows.append(
                [r.run, rate, icpt, "", repr(self.theoretical_rate), repr(self.rate_limit), repr(self.kappa), int(r.degenerate)]
            )
        rate_rows.append(
            ["summary", repr(self.mean_rate), "", repr(self.half_width), repr(self.theoretical_rate),
             repr(self.rate_limit), repr(self.kappa), int(all(r.degenerate for r in self.runs))]
        )
        files = [out / "errors.csv", out / "rates.csv", out / "config_echo.ini"]
        _write_rows(files[0], ["run", "m", "N", "kappa", "strong_error"], err_rows)
        _write_rows(
            files[1],
            ["run", "empirical_rate", "intercept", "half_width_95", "theoretical_rate", "rate_limit", "kappa", "degenerate"],
            rate_rows,
        )
        files[2].write_text(config_to_text(self.cfg))
        for r in self.runs:
            sub = out / f"run_{r.run}"
            sub.mkdir(exist_ok=True)
            for lv in r.ensemble.levels:
                _write_column(sub / f"terminal_m{lv.m}.csv", lv.terminal)
                files.append(sub / f"terminal_m{lv.m}.csv")
            _write_column(sub / "terminal_ref.csv", r.ensemble.reference.terminal)
            files.append(sub / "terminal_ref.csv")
        if self.fp_diagnostics:
            lines = []
            for (stream, N), d in sorted(self.fp_diagnostics.items()):
                lines.append(f"[drift_stream={stream} N={N:g}]\n{d.as_text()}")
            (out / "fp_diagnostics.txt").write_text("\n".join(lines))
            files.append(out / "fp_diagnostics.txt")
        return files


def _level_drifts(cfg: ExperimentConfig, run: int, Ns: dict[int, float], cache: dict, diagnostics: dict):
    if cfg.drift_override != "none":
        c = cfg.drift_constant if cfg.drift_override == "constant" else 0.0
        return {m: ConstantDrift(c, Ns[m]) for m in Ns}
    stream = 0 if cfg.fixed_drift else run
    F = cfg.nonlinearity
    if stream not in cache:
        h = generate_h(cfg, Ns.values(), run)
        built = {}
        ref = build_level_drift(cfg, h, Ns[cfg.m_ref], F)
        for m, N in Ns.items():
            if N in built:
                continue
            if N == ref.N:
                built[N] = ref
            else:
                built[N] = build_level_drift(cfg, h, N, F, ref.field if cfg.shared_density else None)
        for N, lvl in built.items():
            if lvl.diagnostics is not None:
                diagnostics[(stream, N)] = lvl.diagnostics
        cache.clear()  # keep at most one drift family in memory
        cache[stream] = {m: built[Ns[m]].evaluator for m in Ns}
    return cache[stream]


def run_rate_sweep(cfg: ExperimentConfig) -> RateSweepResult:
    """Coupled strong errors per level and their log-log rate, over ``n_runs`` runs."""
    if len(cfg.levels) < 2:
        raise ValueError("rate sweep needs at least two levels")
    Ns = smoothing_levels(cfg)
    plan = RatePlan(cfg.beta, cfg.lam)
    cache: dict = {}
    fp_diag: dict = {}
    runs = []
    for r in range(cfg.n_runs):
        try:
            drifts = _level_drifts(cfg, r, Ns, cache, fp_diag)
            ref = drifts[cfg.m_ref]
            ens = simulate_ensemble(cfg, {m: drifts[m] for m in cfg.levels}, ref, run=r)
        except (NumericalFailure, FpSolverError, EulerPathError) as e:
            raise NumericalFailure(f"run {r}: {e}") from e
        errors = {lv.m: strong_error(lv, ens.reference) for lv in ens.levels}
        scale = 1.0 + float(np.mean(np.abs(ens.reference.terminal)))
        degenerate = max(errors.values()) < DEGENERATE_ERROR * scale
        report = None if degenerate else fit_rate(errors.items(), plan.theoretical_rate)
        if degenerate:
            log.warning("run %d: strong errors at roundoff level; rate not reported", r)
        runs.append(RunOutcome(r, Ns, errors, report, degenerate, ens))
    return RateSweepResult(runs, cfg, plan.kappa, plan.theoretical_rate, rate_limit(cfg.beta), fp_diag)


# ------------------------------------------------------------------ helpers


def _write_column(path: Path, values: np.ndarray, name: str = "x") -> None:
    np.savetxt(path, np.asarray(values), header=name, comments="", fmt="%.17g")


def _write_rows(path: Path, header: list[str], rows: list[list]) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
