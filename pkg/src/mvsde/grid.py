"""Uniform 1D grids, sampled functions and linear interpolation."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class SpatialGrid:
    lo: float
    hi: float
    n: int
    dx: float = field(init=False)

    def __post_init__(self):
        if not (self.lo < self.hi):
            raise ValueError(f"grid needs lo < hi, got lo={self.lo}, hi={self.hi}")
        if self.n < 2:
            raise ValueError(f"grid needs at least 2 nodes, got n={self.n}")
        object.__setattr__(self, "dx", (self.hi - self.lo) / (self.n - 1))

    def node(self, i: int) -> float:
        return self.lo + i * self.dx

    @cached_property
    def nodes(self) -> np.ndarray:
        x = self.lo + np.arange(self.n) * self.dx
        x.setflags(write=False)
        return x

    def extend(self, k: int) -> SpatialGrid:
        """Grid with ``k`` extra nodes on each side, same spacing and alignment."""
        return SpatialGrid(self.lo - k * self.dx, self.hi + k * self.dx, self.n + 2 * k)


def make_uniform_grid(lo: float, hi: float, n: int) -> SpatialGrid:
    return SpatialGrid(float(lo), float(hi), int(n))


def _frozen(values) -> np.ndarray:
    v = np.array(values, dtype=float)
    v.setflags(write=False)
    return v


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: SpatialGrid
    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        object.__setattr__(self, "values", v)

    def __call__(self, x):
        return interp_space(self, x)

    @classmethod
    def from_callable(cls, grid: SpatialGrid, fn) -> GridFunction:
        return cls(grid, fn(grid.nodes))


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """Values at stored times (rows) by grid nodes (columns)."""

    grid: SpatialGrid
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = _frozen(self.times)
        v = _frozen(self.values)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("need at least two stored times")
        if t[0] != 0.0 or not np.all(np.diff(t) > 0):
            raise ValueError("times must start at 0 and be strictly increasing")
        if v.shape != (t.size, self.grid.n):
            raise ValueError(f"values shape {v.shape} != ({t.size}, {self.grid.n})")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def row(self, k: int) -> GridFunction:
        return GridFunction(self.grid, self.values[k])

    def __call__(self, t, x):
        return interp_spacetime(self, t, x)


def interp_space(f: GridFunction, x):
    """Piecewise-linear interpolation, zero outside ``[lo, hi]``.

    Accepts a scalar or an array of query points. Exact node queries return
    the stored value bitwise.
    """
    return _interp_row(f.grid, f.values, x)


def _interp_row(grid: SpatialGrid, row: np.ndarray, x):
    out = np.interp(x, grid.nodes, row, left=0.0, right=0.0)
    return float(out) if np.ndim(out) == 0 else out


def _time_bracket(times: np.ndarray, t: float) -> tuple[int, float]:
    T = times[-1]
    tol = 4 * np.finfo(float).eps * max(1.0, abs(T))
    if t < -tol or t > T + tol:
        raise ValueError(f"t={t} outside stored range [0, {T}]")
    t = min(max(t, 0.0), T)
    k = int(np.searchsorted(times, t, side="right")) - 1
    k = min(max(k, 0), times.size - 1)
    if times[k] == t or k == times.size - 1:
        return k, 0.0
    # snap queries within a few ulps of the next stored time
    if abs(times[k + 1] - t) <= tol:
        return k + 1, 0.0
    return k, (t - times[k]) / (times[k + 1] - times[k])


def interp_spacetime(field: SpaceTimeField, t: float, x):
    """Bilinear evaluation: space-interpolate the bracketing rows, blend in t."""
    k, w = _time_bracket(field.times, float(t))
    a = _interp_row(field.grid, field.values[k], x)
    if w == 0.0:
        return a
    b = _interp_row(field.grid, field.values[k + 1], x)
    return (1.0 - w) * a + w * b


def write_grid_function_csv(path, f: GridFunction, value_name: str = "value") -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", value_name])
        for x, v in zip(f.grid.nodes, f.values):
            w.writerow([repr(float(x)), repr(float(v))])


def read_grid_function_csv(path) -> GridFunction:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    x = data[:, 0]
    return GridFunction(make_uniform_grid(x[0], x[-1], x.size), data[:, 1])


def write_field_csv(path, field: SpaceTimeField, value_name: str = "value", time_stride: int = 1) -> None:
    """Long-format ``t,x,value`` export, optionally thinning the stored times."""
    path = Path(path)
    x = field.grid.nodes
    rows = list(range(0, field.times.size, time_stride))
    if rows[-1] != field.times.size - 1:
        rows.append(field.times.size - 1)
    with path.open("w", newline="") as fh:
        fh.write(f"t,x,{value_name}\n")
        for k in rows:
            t = field.times[k]
            block = np.column_stack([np.full_like(x, t), x, field.values[k]])
            np.savetxt(fh, block, delimiter=",", fmt="%.17g")
