"""Rate formulas, strong errors, log-log rate fits, KS tests and Hurst checks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import GridFunction
from .randproc import FbmPath


def _check_beta_lambda(beta: float, lam: float) -> None:
    if not 0 < beta < 0.5:
        raise ValueError(f"beta must lie in (0, 1/2), got {beta}")
    if not 0 < lam < 0.5 - beta:
        raise ValueError(f"lambda must lie in (0, 1/2 - beta) = (0, {0.5 - beta:g}), got {lam}")


def theoretical_kappa(beta: float, lam: float) -> float:
    """Exponent of the smoothing/step coupling ``N(m) = m**kappa``."""
    _check_beta_lambda(beta, lam)
    return 1.0 / ((1 + beta) + 2 * (0.5 - beta - lam) ** 2)


def theoretical_rate(beta: float, lam: float) -> float:
    """Guaranteed strong rate, i.e. error ``<= c m**(-rate)``."""
    return 0.5 - 0.5 * (1 + beta) * theoretical_kappa(beta, lam)


def rate_limit(beta: float) -> float:
    """Supremum of ``theoretical_rate(beta, lam)`` as ``lam`` decreases to 0."""
    if not 0 < beta < 0.5:
        raise ValueError(f"beta must lie in (0, 1/2), got {beta}")
    return 0.5 - 0.5 * (1 + beta) / ((1 + beta) + 2 * (0.5 - beta) ** 2)


def smoothing_level(m: int, kappa: float) -> float:
    """``N(m) = round(m**kappa)`` (at least 1)."""
    return float(max(1, round(m**kappa)))


@dataclass(frozen=True)
class RatePlan:
    beta: float
    lam: float

    def __post_init__(self):
        _check_beta_lambda(self.beta, self.lam)

    @property
    def kappa(self) -> float:
        return theoretical_kappa(self.beta, self.lam)

    @property
    def theoretical_rate(self) -> float:
        return theoretical_rate(self.beta, self.lam)

    def N(self, m: int) -> float:
        return smoothing_level(m, self.kappa)


def strong_error(level, reference) -> float:
    """Mean absolute terminal difference over coupled paths."""
    a = np.asarray(getattr(level, "terminal", level), dtype=float)
    b = np.asarray(getattr(reference, "terminal", reference), dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"path counts differ: {a.shape} vs {b.shape}")
    return float(np.mean(np.abs(a - b)))


@dataclass(frozen=True)
class RateReport:
    points: tuple[tuple[int, float], ...]
    slope: float  # empirical rate: error ~ m**(-slope)
    intercept: float
    theoretical_rate: float = math.nan

    @property
    def rate(self) -> float:
        return self.slope


def fit_rate(points, theoretical: float = math.nan) -> RateReport:
    """OLS of ``log10(error)`` on ``log10(m)``; the slope is returned negated."""
    pts = sorted((int(m), float(e)) for m, e in points)
    if len(pts) < 2:
        raise ValueError("need at least two (m, error) points")
    m = np.array([p[0] for p in pts], dtype=float)
    e = np.array([p[1] for p in pts])
    if np.any(m <= 0) or len(set(m)) != len(m):
        raise ValueError("step counts must be positive and distinct")
    if np.any(~(e > 0)) or not np.all(np.isfinite(e)):
        raise ValueError("errors must be positive and finite")
    x = np.log10(m)
    y = np.log10(e)
    xc = x - x.mean()
    slope = float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))
    intercept = float(y.mean() - slope * x.mean())
    return RateReport(tuple(pts), -slope, intercept, theoretical)


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float
    n: int


def kolmogorov_sf(lam: float, tol: float = 1e-12, max_terms: int | None = None) -> float:
    """``P(K > lam)`` for the Kolmogorov distribution.

    Uses the alternating series ``2 sum (-1)^(k-1) exp(-2 k^2 lam^2)``,
    stopped once a term drops below ``tol``. Below ``lam = 0.2`` the series
    is numerically useless and the dual theta-function form is used.
    """
    if lam <= 0:
        return 1.0
    if lam < 0.2:
        s = sum(math.exp(-((2 * k - 1) ** 2) * math.pi**2 / (8 * lam * lam)) for k in range(1, 6))
        return min(1.0, max(0.0, 1.0 - math.sqrt(2 * math.pi) / lam * s))
    total = 0.0
    k = 1
    while True:
        term = math.exp(-2.0 * k * k * lam * lam)
        total += term if k % 2 else -term
        if (max_terms is None and term < tol) or (max_terms is not None and k >= max_terms):
            break
        k += 1
    return min(1.0, max(0.0, 2.0 * total))


def ks_statistic(samples, cdf) -> float:
    """``sup |F_n - F|`` for a callable or gridded CDF."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    F = _cdf_values(cdf, x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def _cdf_values(cdf, x):
    if isinstance(cdf, GridFunction):
        return np.clip(np.interp(x, cdf.grid.nodes, cdf.values, left=0.0, right=1.0), 0.0, 1.0)
    return np.clip(np.asarray(cdf(x), dtype=float), 0.0, 1.0)


def ks_test(samples, cdf) -> KsResult:
    """One-sample Kolmogorov-Smirnov test with Stephens' finite-n scaling."""
    n = int(np.size(samples))
    if n < 8:
        raise ValueError(f"KS test needs at least 8 samples, got {n}")
    D = ks_statistic(samples, cdf)
    sn = math.sqrt(n)
    p = kolmogorov_sf((sn + 0.12 + 0.11 / sn) * D)
    return KsResult(D, p, n)


HURST_LAGS = (1, 2, 4, 8, 16, 32)


def hurst_estimate(path, dt: float | None = None, lags=HURST_LAGS) -> float:
    """Half the slope of log increment variance against log lag length."""
    if isinstance(path, FbmPath):
        values, dt = path.values, path.dt
    else:
        values = np.asarray(path, dtype=float)
        if dt is None:
            raise ValueError("dt is required for raw arrays")
    if values.size < 2**10:
        raise ValueError(f"need at least 1024 points, got {values.size}")
    v = np.empty(len(lags))
    for j, k in enumerate(lags):
        d = values[k:] - values[:-k]
        v[j] = np.var(d)
        # roundoff-level spread around a constant increment counts as zero
        if not v[j] > 1e-20 * max(np.mean(d * d), 1e-300):
            raise ValueError("degenerate path: zero increment variance")
    slope = np.polyfit(np.log(np.asarray(lags) * dt), np.log(v), 1)[0]
    return float(slope / 2)
