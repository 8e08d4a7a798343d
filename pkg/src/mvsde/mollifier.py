"""Heat kernel and heat-semigroup smoothing of rough drifts.

The smoothed drift is ``b^N = h' * p_{1/N} = h * p'_{1/N}``: the derivative is
moved onto the Gaussian so only the (Hölder) function ``h`` is sampled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.signal

from .grid import GridFunction, SpatialGrid

TRUNCATION_SIGMAS = 8.0


def heat_kernel(t: float, z):
    if not t > 0:
        raise ValueError(f"heat kernel needs t > 0, got {t}")
    return np.exp(-np.square(z) / (2 * t)) / math.sqrt(2 * math.pi * t)


def heat_kernel_derivative(t: float, z):
    """Spatial derivative ``-(z/t) p_t(z)``."""
    if not t > 0:
        raise ValueError(f"heat kernel needs t > 0, got {t}")
    return -(np.asarray(z) / t) * heat_kernel(t, z)


@dataclass(frozen=True)
class MollifierSpec:
    N: float
    truncation_radius: float | None = None

    def __post_init__(self):
        if not self.N > 0:
            raise ValueError(f"smoothing parameter N must be positive, got {self.N}")
        if self.truncation_radius is None:
            object.__setattr__(self, "truncation_radius", TRUNCATION_SIGMAS * math.sqrt(1.0 / self.N))
        elif not self.truncation_radius > 0:
            raise ValueError("truncation radius must be positive")

    @property
    def bandwidth(self) -> float:
        return 1.0 / self.N

    def support_nodes(self, dx: float) -> int:
        """Kernel half-width in grid steps (the kernel step always equals ``dx``)."""
        return int(math.ceil(self.truncation_radius / dx - 1e-9))

    def kernel_resolution(self, dx: float) -> int:
        return 2 * self.support_nodes(dx) + 1


def _trapezoid_kernel(kernel: np.ndarray, dx: float) -> np.ndarray:
    w = np.full(kernel.size, dx)
    w[0] = w[-1] = 0.5 * dx
    return kernel * w


def derivative_kernel_weights(spec: MollifierSpec, dx: float) -> np.ndarray:
    """Trapezoid-weighted samples of ``p'_{1/N}`` at offsets ``-K dx .. K dx``."""
    K = spec.support_nodes(dx)
    z = np.arange(-K, K + 1) * dx
    return _trapezoid_kernel(heat_kernel_derivative(spec.bandwidth, z), dx)


def _offset(outer: SpatialGrid, inner: SpatialGrid) -> int:
    if not math.isclose(outer.dx, inner.dx, rel_tol=1e-9):
        raise ValueError("input and output grids must share the same spacing")
    k = (inner.lo - outer.lo) / outer.dx
    ki = int(round(k))
    if abs(k - ki) > 1e-6:
        raise ValueError("output grid nodes are not aligned with the input grid")
    return ki


def _correlate(values: np.ndarray, weights: np.ndarray, method: str) -> np.ndarray:
    # out[i] = sum_j values[i + K + j] * weights[K - j]  (a true convolution)
    if method == "direct":
        return np.convolve(values, weights, mode="valid")
    if method == "fft":
        return scipy.signal.fftconvolve(values, weights, mode="valid")
    raise ValueError(f"unknown convolution method {method!r}")


def mollify_drift(
    h: GridFunction,
    spec: MollifierSpec,
    out_grid: SpatialGrid | None = None,
    method: str = "direct",
) -> GridFunction:
    """Smoothed drift ``sum_j h(y_j) p'_{1/N}(x_i - y_j) dy`` on ``out_grid``.

    ``h`` must cover ``out_grid`` plus the kernel support on both sides.
    Without ``out_grid`` the result lives on the largest interior grid the
    support allows. ``method="fft"`` evaluates the same sum by FFT.
    """
    dx = h.grid.dx
    K = spec.support_nodes(dx)
    if out_grid is None:
        if h.grid.n <= 2 * K + 1:
            raise ValueError("h grid is too short for the kernel support")
        out_grid = SpatialGrid(h.grid.node(K), h.grid.node(h.grid.n - 1 - K), h.grid.n - 2 * K)
    start = _offset(h.grid, out_grid)
    stop = start + out_grid.n - 1
    if start < K or stop + K > h.grid.n - 1:
        raise ValueError(
            f"h must extend {spec.truncation_radius:.4g} beyond the output grid on both sides"
        )
    w = derivative_kernel_weights(spec, dx)
    seg = h.values[start - K : stop + K + 1]
    return GridFunction(out_grid, _correlate(seg, w, method))


def smooth(f: GridFunction, spec: MollifierSpec, out_grid: SpatialGrid | None = None) -> GridFunction:
    """Heat-semigroup action ``P_{1/N} f`` by the same truncated trapezoid rule."""
    dx = f.grid.dx
    K = spec.support_nodes(dx)
    if out_grid is None:
        out_grid = SpatialGrid(f.grid.node(K), f.grid.node(f.grid.n - 1 - K), f.grid.n - 2 * K)
    start = _offset(f.grid, out_grid)
    stop = start + out_grid.n - 1
    if start < K or stop + K > f.grid.n - 1:
        raise ValueError("input does not cover the kernel support")
    z = np.arange(-K, K + 1) * dx
    w = _trapezoid_kernel(heat_kernel(spec.bandwidth, z), dx)
    return GridFunction(out_grid, np.convolve(f.values[start - K : stop + K + 1], w, mode="valid"))


def required_margin(spec: MollifierSpec, dx: float) -> int:
    """Number of extra ``h`` nodes needed on each side of an output grid."""
    return spec.support_nodes(dx)
