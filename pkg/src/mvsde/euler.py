"""Drift assembly and Brownian-coupled Euler-Maruyama ensembles."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Mapping

import numpy as np

from .fokker_planck import NonlinearF
from .grid import GridFunction, SpaceTimeField, interp_space, interp_spacetime
from .randproc import TAG_NOISE, BrownianIncrements, SeedSpec

Drift = Callable[[float, np.ndarray], np.ndarray]


class EulerPathError(RuntimeError):
    def __init__(self, message: str, path_index: int | None = None, step: int | None = None):
        where = []
        if path_index is not None:
            where.append(f"path {path_index}")
        if step is not None:
            where.append(f"step {step}")
        super().__init__(message + (f" ({', '.join(where)})" if where else ""))
        self.path_index = path_index
        self.step = step


@dataclass(frozen=True, eq=False)
class DriftEvaluator:
    """``B(t, x) = F(rho(t, x)) * b(x)``, zero wherever ``x`` leaves the grid."""

    field: SpaceTimeField
    bN: GridFunction
    F: NonlinearF
    N: float = math.nan

    def __post_init__(self):
        if self.field.grid != self.bN.grid:
            raise ValueError("density field and drift must share a grid")

    @property
    def T(self) -> float:
        return self.field.T

    @property
    def bound(self) -> float:
        return self.F.sup_abs * float(np.max(np.abs(self.bN.values)))

    def __call__(self, t, x):
        return self.F(interp_spacetime(self.field, t, x)) * interp_space(self.bN, x)


def drift_eval(d: DriftEvaluator, t: float, x):
    return d(t, x)


@dataclass(frozen=True)
class ConstantDrift:
    c: float = 0.0
    N: float = math.nan

    @property
    def bound(self) -> float:
        return abs(self.c)

    def __call__(self, t, x):
        return np.full(np.shape(x), self.c, dtype=float)


@dataclass(frozen=True)
class LinearDrift:
    """``B(t, x) = -theta x`` (Ornstein-Uhlenbeck)."""

    theta: float = 1.0
    N: float = math.nan

    def __call__(self, t, x):
        return -self.theta * np.asarray(x, dtype=float)


def euler_terminal(x0: np.ndarray, drift: Drift, W: np.ndarray, T: float, track: bool = False):
    """Euler-Maruyama terminal values for a batch of paths.

    ``W`` has shape ``(n_paths, m + 1)`` and holds the Brownian path at the
    step times. The state is kept as ``x0 + (accumulated drift) + W(t_i)``,
    which is the usual recursion ``X += B h + dW`` reorganised so that every
    level coupled to the same fine path shares ``W(T)`` bitwise.

    With ``track=True`` also returns the largest ``|B|`` evaluated.
    """
    x0 = np.asarray(x0, dtype=float)
    m = W.shape[1] - 1
    h = T / m
    D = np.zeros_like(x0)
    X = x0 + W[:, 0]
    max_b = 0.0
    for i in range(m):
        B = drift(i * h, X)
        if track:
            max_b = max(max_b, float(np.max(np.abs(B))))
        D = D + B * h
        X = (x0 + D) + W[:, i + 1]
        if not np.all(np.isfinite(X)):
            bad = int(np.flatnonzero(~np.isfinite(X))[0])
            raise EulerPathError("non-finite Euler state", bad, i + 1)
    return (X, max_b) if track else X


def euler_path(x0: float, d: Drift, w: BrownianIncrements) -> float:
    """Single-path Euler-Maruyama scheme; returns ``X_T``."""
    horizon = getattr(d, "T", None)
    if horizon is not None and not math.isclose(horizon, w.T, rel_tol=1e-12):
        raise ValueError(f"increments horizon {w.T} differs from drift horizon {horizon}")
    X = euler_terminal(np.array([x0]), d, w.path[None, :], w.T)
    return float(X[0])


@dataclass(frozen=True, eq=False)
class LevelResult:
    m: int
    N: float
    terminal: np.ndarray
    max_abs_drift: float = math.nan

    def __post_init__(self):
        t = np.asarray(self.terminal, dtype=float)
        if not np.all(np.isfinite(t)):
            raise ValueError("terminal values must be finite")
        t.setflags(write=False)
        object.__setattr__(self, "terminal", t)


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    levels: list[LevelResult]
    reference: LevelResult
    config_echo: Any = None

    def level(self, m: int) -> LevelResult:
        for lv in self.levels:
            if lv.m == m:
                return lv
        raise KeyError(m)


def path_draws(seed: SeedSpec, m: int, T: float) -> tuple[float, np.ndarray]:
    """Initial value and ``m`` Brownian increments from one per-path stream."""
    g = seed.generator()
    x0 = g.standard_normal()
    dW = math.sqrt(T / m) * g.standard_normal(m)
    return x0, dW


def noise_seed(master_seed: int, run: int, path: int) -> SeedSpec:
    return SeedSpec(master_seed, path, (TAG_NOISE, run))


@dataclass
class EnsembleSpec:
    """The ensemble-relevant slice of an experiment configuration."""

    n_paths: int
    m_ref: int
    levels: tuple[int, ...]
    T: float = 1.0
    seed: int = 0
    chunk: int = 2000

    @classmethod
    def from_config(cls, cfg) -> EnsembleSpec:
        return cls(cfg.n_paths, cfg.m_ref, tuple(cfg.levels), cfg.T, cfg.seed)


def simulate_ensemble(
    cfg,
    drifts: Mapping[int, Drift],
    ref_drift: Drift,
    run: int = 0,
) -> EnsembleResult:
    """Run every level and the reference on the same Brownian paths.

    Path ``p`` draws its initial value and its ``m_ref`` fine increments
    from its own stream, so results do not depend on chunking. Coarse
    levels subsample the fine running sum.
    """
    spec = cfg if isinstance(cfg, EnsembleSpec) else EnsembleSpec.from_config(cfg)
    m_ref = spec.m_ref
    for m in drifts:
        if m < 1 or m_ref % m:
            raise ValueError(f"level m={m} does not divide m_ref={m_ref}")
    levels = sorted(drifts)
    n = spec.n_paths
    out = {m: np.empty(n) for m in levels}
    ref = np.empty(n)
    max_b = {m: 0.0 for m in levels}
    max_ref = 0.0
    for start in range(0, n, spec.chunk):
        stop = min(n, start + spec.chunk)
        x0 = np.empty(stop - start)
        dW = np.empty((stop - start, m_ref))
        for j, p in enumerate(range(start, stop)):
            x0[j], dW[j] = path_draws(noise_seed(spec.seed, run, p), m_ref, spec.T)
        W = np.zeros((stop - start, m_ref + 1))
        np.cumsum(dW, axis=1, out=W[:, 1:])
        try:
            ref[start:stop], b = euler_terminal(x0, ref_drift, W, spec.T, track=True)
            max_ref = max(max_ref, b)
            for m in levels:
                out[m][start:stop], b = euler_terminal(x0, drifts[m], W[:, :: m_ref // m], spec.T, track=True)
                max_b[m] = max(max_b[m], b)
        except EulerPathError as e:
            raise EulerPathError("ensemble aborted: non-finite Euler state", start + e.path_index, e.step) from e
    return EnsembleResult(
        [LevelResult(m, getattr(drifts[m], "N", math.nan), out[m], max_b[m]) for m in levels],
        LevelResult(m_ref, getattr(ref_drift, "N", math.nan), ref, max_ref),
        cfg,
    )
