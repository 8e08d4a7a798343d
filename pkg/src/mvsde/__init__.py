"""Euler-Maruyama schemes for McKean-Vlasov SDEs with rough, density-dependent drift."""

from .analysis import (
    KsResult,
    RatePlan,
    RateReport,
    fit_rate,
    hurst_estimate,
    ks_test,
    rate_limit,
    strong_error,
    theoretical_kappa,
    theoretical_rate,
)
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .euler import DriftEvaluator, EnsembleResult, euler_path, simulate_ensemble
from .experiments import run_density_compare, run_drift_gen, run_rate_sweep
from .fokker_planck import FpSolverOptions, NonlinearF, solve_fp
from .grid import GridFunction, SpaceTimeField, SpatialGrid, make_uniform_grid
from .mollifier import MollifierSpec, heat_kernel, mollify_drift
from .randproc import SeedSpec, brownian_increments, fbm_path

__all__ = [
    "ConfigError", "DriftEvaluator", "EnsembleResult", "ExperimentConfig", "FpSolverOptions",
    "GridFunction", "KsResult", "MollifierSpec", "NonlinearF", "RatePlan", "RateReport",
    "SeedSpec", "SpaceTimeField", "SpatialGrid", "brownian_increments", "euler_path",
    "fbm_path", "fit_rate", "heat_kernel", "hurst_estimate", "ks_test", "load_config",
    "make_uniform_grid", "mollify_drift", "parse_config", "rate_limit", "run_density_compare",
    "run_drift_gen", "run_rate_sweep", "simulate_ensemble", "solve_fp", "strong_error",
    "theoretical_kappa", "theoretical_rate",
]
