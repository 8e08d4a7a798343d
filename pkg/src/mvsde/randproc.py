"""Seeded random streams, Brownian increments and fractional Brownian motion.

Every stream is a Philox (counter-based) generator keyed through
``numpy.random.SeedSequence(master_seed, spawn_key=(*tag, stream_id))``.
Normal variates come from ``Generator.standard_normal``, i.e. numpy's
Ziggurat sampler; bitwise reproducibility of saved runs depends on that
choice and on the numpy major version.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .grid import GridFunction, SpatialGrid

# stream tags, so that different consumers of one master seed never collide
TAG_FBM = 1
TAG_INITIAL = 2
TAG_NOISE = 3


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    stream_id: int = 0
    tag: tuple[int, ...] = ()

    def __post_init__(self):
        for v in (self.master_seed, self.stream_id, *self.tag):
            if not 0 <= int(v) < 2**64:
                raise ValueError(f"seed components must be 64-bit unsigned, got {v}")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.master_seed), spawn_key=(*self.tag, int(self.stream_id)))
        return np.random.Generator(np.random.Philox(ss))

    def with_stream(self, stream_id: int) -> SeedSpec:
        return SeedSpec(self.master_seed, stream_id, self.tag)

    def with_tag(self, *tag: int) -> SeedSpec:
        return SeedSpec(self.master_seed, self.stream_id, tuple(int(t) for t in tag))


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BrownianIncrements:
    """Increments of one Brownian path on ``m`` equal steps of ``[0, T]``.

    ``path`` holds the running sums ``W(t_0)=0, W(t_1), ..., W(t_m)``
    accumulated left to right on the finest grid the path was drawn on.
    Coarsening subsamples ``path`` instead of re-adding, so ``W_T`` is
    identical bitwise across every level derived from one draw.
    """

    m: int
    T: float
    dW: np.ndarray
    path: np.ndarray = field(default=None)

    def __post_init__(self):
        dW = _readonly(self.dW)
        if dW.shape != (self.m,):
            raise ValueError(f"expected {self.m} increments, got shape {dW.shape}")
        object.__setattr__(self, "dW", dW)
        path = self.path
        if path is None:
            path = np.concatenate([[0.0], np.cumsum(dW)])
        path = _readonly(path)
        if path.shape != (self.m + 1,):
            raise ValueError("path must have m + 1 entries")
        object.__setattr__(self, "path", path)

    @property
    def W_T(self) -> float:
        return float(self.path[-1])

    @property
    def dt(self) -> float:
        return self.T / self.m


def brownian_increments(seed: SeedSpec, m: int, T: float) -> BrownianIncrements:
    if m < 1:
        raise ValueError(f"need m >= 1 steps, got {m}")
    if not T > 0:
        raise ValueError(f"need T > 0, got {T}")
    dW = np.sqrt(T / m) * seed.generator().standard_normal(m)
    return BrownianIncrements(m, float(T), dW)


def block_sums(dW: np.ndarray, factor: int) -> np.ndarray:
    """Left-to-right sums over consecutive blocks of ``factor`` along the last axis."""
    m = dW.shape[-1]
    if factor < 1 or m % factor:
        raise ValueError(f"factor {factor} does not divide {m}")
    blocks = dW.reshape(*dW.shape[:-1], m // factor, factor)
    acc = blocks[..., 0].copy()
    for k in range(1, factor):
        acc += blocks[..., k]
    return acc


def coarsen_increments(fine: BrownianIncrements, factor: int) -> BrownianIncrements:
    if factor < 1 or fine.m % factor:
        raise ValueError(f"factor {factor} does not divide m={fine.m}")
    if factor == 1:
        return fine
    return BrownianIncrements(fine.m // factor, fine.T, block_sums(fine.dW, factor), fine.path[::factor])


@dataclass(frozen=True, eq=False)
class FbmPath:
    H: float
    n: int
    dt: float
    values: np.ndarray
    method: str  # "circulant" or "cholesky"

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(self.values))


def fgn_autocovariance(H: float, k: int) -> np.ndarray:
    """Autocovariance of unit-spacing fractional Gaussian noise at lags 0..k-1."""
    j = np.arange(k, dtype=float)
    return 0.5 * (np.abs(j + 1) ** (2 * H) - 2 * j ** (2 * H) + np.abs(j - 1) ** (2 * H))


def _fgn_circulant(H: float, k: int, rng: np.random.Generator):
    gamma = fgn_autocovariance(H, k + 1)
    # first row of the 2k circulant: gamma_0..gamma_k, gamma_{k-1}..gamma_1
    row = np.concatenate([gamma, gamma[k - 1:0:-1]])
    M = row.size
    lam = np.fft.fft(row).real
    if lam.min() < -1e-10 * lam.max():
        return None
    lam = np.clip(lam, 0.0, None)
    z = rng.standard_normal(M) + 1j * rng.standard_normal(M)
    y = np.fft.fft(np.sqrt(lam / M) * z)
    return y.real[:k]


def _fgn_cholesky(gamma: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    L = scipy.linalg.cholesky(scipy.linalg.toeplitz(gamma), lower=True)
    return L @ rng.standard_normal(gamma.size)


def fbm_path(seed: SeedSpec, H: float, n: int, dt: float, method: str = "auto") -> FbmPath:
    """fBm sampled at ``t_k = k*dt``, ``k = 0..n-1``, pinned to 0 at ``t_0``.

    Fractional Gaussian noise is drawn by Davies-Harte circulant embedding;
    if the embedding has a negative eigenvalue (or ``method="cholesky"``) the
    exact Cholesky factor of the Toeplitz covariance is used instead. The
    construction actually used is recorded in ``FbmPath.method``.
    """
    if not 0.5 < H < 1:
        raise ValueError(f"Hurst index must lie in (1/2, 1), got {H}")
    if n < 2:
        raise ValueError(f"need n >= 2 points, got {n}")
    if not dt > 0:
        raise ValueError(f"need dt > 0, got {dt}")
    if method not in ("auto", "circulant", "cholesky"):
        raise ValueError(f"unknown fBm method {method!r}")
    rng = seed.generator()
    fgn = None
    used = "cholesky"
    if method != "cholesky":
        fgn = _fgn_circulant(H, n - 1, rng)
        if fgn is not None:
            used = "circulant"
        elif method == "circulant":
            raise ValueError("circulant embedding is not nonnegative definite")
    if fgn is None:
        fgn = _fgn_cholesky(fgn_autocovariance(H, n - 1), rng)
    values = np.concatenate([[0.0], np.cumsum(fgn * dt**H)])
    return FbmPath(float(H), int(n), float(dt), values, used)


def fbm_on_grid(seed: SeedSpec, H: float, grid: SpatialGrid) -> GridFunction:
    """fBm path laid on ``grid`` as a function of space, zero at the left end."""
    p = fbm_path(seed, H, grid.n, grid.dx)
    return GridFunction(grid, p.values)


def sample_initial(seed: SeedSpec, n_paths: int) -> np.ndarray:
    """i.i.d. standard normal initial positions."""
    if n_paths < 1:
        raise ValueError(f"need n_paths >= 1, got {n_paths}")
    return seed.generator().standard_normal(n_paths)
