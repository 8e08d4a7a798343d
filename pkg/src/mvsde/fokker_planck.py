"""Regularised Fokker-Planck solver (method of lines + Dormand-Prince 5(4)).

Solves ``d_t rho = 1/2 rho_xx - d_x[Ft(rho) b]`` with ``Ft(x) = x F(x)`` on a
fixed uniform grid with ``rho = 0`` at both ends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numba
import numpy as np
import scipy.integrate
import scipy.special

from .grid import GridFunction, SpaceTimeField

F_KINDS = ("sine", "cosine", "sigmoid", "custom")


@dataclass(frozen=True)
class NonlinearF:
    """The McKean nonlinearity ``F`` applied pointwise to the density.

    ``sine`` is ``a sin(x)``, ``sigmoid`` is ``1/(1+exp(-k(x-c)))``,
    ``cosine`` is ``cos(x)``. ``custom`` wraps a user callable and needs
    an explicit ``bound`` on ``sup|F|``.
    """

    kind: str = "sine"
    amplitude: float = 1.0
    steepness: float = 100.0
    center: float = 0.2
    func: Callable | None = field(default=None, compare=False)
    bound: float | None = None

    def __post_init__(self):
        if self.kind not in F_KINDS:
            raise ValueError(f"unknown F kind {self.kind!r}; expected one of {F_KINDS}")
        if self.kind == "custom" and (self.func is None or self.bound is None):
            raise ValueError("custom F needs both func and bound")

    def __call__(self, x):
        if self.kind == "sine":
            return self.amplitude * np.sin(x)
        if self.kind == "cosine":
            return np.cos(x)
        if self.kind == "sigmoid":
            return scipy.special.expit(self.steepness * (np.asarray(x) - self.center))
        return self.func(x)

    def tilde(self, x):
        """``x F(x)``; vanishes at 0."""
        return np.asarray(x) * self(x)

    @property
    def sup_abs(self) -> float:
        if self.kind == "sine":
            return abs(self.amplitude)
        if self.kind in ("cosine", "sigmoid"):
            return 1.0
        return float(self.bound)

    @property
    def label(self) -> str:
        if self.kind == "sine":
            return "sine" if self.amplitude == 1.0 else f"sine_a{self.amplitude:g}"
        if self.kind == "sigmoid":
            return f"sigmoid_k{self.steepness:g}_c{self.center:g}"
        return self.kind


@dataclass(frozen=True)
class FpSolverOptions:
    abs_tol: float = 1e-9
    rel_tol: float = 1e-7
    max_step: float = math.inf
    store_count: int = 2**11 + 1
    boundary: str = "dirichlet_zero"

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("solver tolerances must be positive")
        if self.store_count < 2:
            raise ValueError("store_count must be at least 2")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")
        if self.boundary != "dirichlet_zero":
            raise ValueError(f"unsupported boundary condition {self.boundary!r}")

    def halved(self) -> FpSolverOptions:
        return FpSolverOptions(self.abs_tol / 2, self.rel_tol / 2, self.max_step, self.store_count, self.boundary)


@dataclass(frozen=True, eq=False)
class FpDiagnostics:
    mass_trace: np.ndarray
    min_value: float
    accepted_steps: int
    rejected_steps: int
    rhs_evals: int = 0
    t_reached: float = 0.0

    @property
    def max_mass_deviation(self) -> float:
        return float(np.max(np.abs(self.mass_trace - 1.0)))

    def as_text(self) -> str:
        items = {
            "accepted_steps": self.accepted_steps,
            "rejected_steps": self.rejected_steps,
            "rhs_evals": self.rhs_evals,
            "t_reached": repr(self.t_reached),
            "min_value": repr(self.min_value),
            "mass_initial": repr(float(self.mass_trace[0])),
            "mass_final": repr(float(self.mass_trace[-1])),
            "max_mass_deviation": repr(self.max_mass_deviation),
        }
        return "".join(f"{k}={v}\n" for k, v in items.items())


class FpSolverError(RuntimeError):
    def __init__(self, message: str, t_reached: float, diagnostics: FpDiagnostics | None = None):
        super().__init__(f"{message} (t reached: {t_reached!r})")
        self.t_reached = t_reached
        self.diagnostics = diagnostics


def total_mass(f: GridFunction) -> float:
    return float(np.trapezoid(f.values, dx=f.grid.dx))


def density_cdf(f: GridFunction) -> GridFunction:
    """Normalised cumulative trapezoid integral, forced non-decreasing."""
    mass = total_mass(f)
    if not mass > 0:
        raise ValueError(f"density must have positive mass, got {mass}")
    c = scipy.integrate.cumulative_trapezoid(f.values, dx=f.grid.dx, initial=0.0)
    c = np.maximum.accumulate(c)
    return GridFunction(f.grid, c / c[-1])


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
# fifth-order weights minus embedded fourth-order weights
_E = [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]


_F_CODES = {"sine": 0, "cosine": 1, "sigmoid": 2}
_ZERO_DRIFT = 3


def _fp_rhs_factory(b: np.ndarray, F: NonlinearF, dx: float):
    inv_dx2 = 0.5 / dx**2
    inv_2dx = 1.0 / (2 * dx)
    zero_drift = not np.any(b)

    def rhs(y: np.ndarray) -> np.ndarray:
        out = np.zeros_like(y)
        out[1:-1] = (y[:-2] - 2.0 * y[1:-1] + y[2:]) * inv_dx2
        if not zero_drift:
            g = F.tilde(y) * b
            out[1:-1] -= (g[2:] - g[:-2]) * inv_2dx
        return out

    return rhs


@numba.njit(cache=True, fastmath=True)
def _f_tilde(v, code, p1, p2):
    if code == 0:
        return v * p1 * math.sin(v)
    if code == 1:
        return v * math.cos(v)
    if code == 2:
        return v / (1.0 + math.exp(-p1 * (v - p2)))
    return 0.0


@numba.njit(cache=True, fastmath=True)
def _rhs_jit(y, b, dx, code, p1, p2, g, out):
    n = y.size
    inv_dx2 = 0.5 / (dx * dx)
    inv_2dx = 1.0 / (2.0 * dx)
    out[0] = 0.0
    out[n - 1] = 0.0
    if code == 3:
        for i in range(1, n - 1):
            out[i] = (y[i - 1] - 2.0 * y[i] + y[i + 1]) * inv_dx2
        return
    for i in range(n):
        g[i] = _f_tilde(y[i], code, p1, p2) * b[i]
    for i in range(1, n - 1):
        out[i] = (y[i - 1] - 2.0 * y[i] + y[i + 1]) * inv_dx2 - (g[i + 1] - g[i - 1]) * inv_2dx


@numba.njit(cache=True)
def _dp_step_jit(y, h, K, A, E, b, dx, code, p1, p2, atol, rtol, stage, g):
    """One Dormand-Prince step; K[0] must hold f(y). Returns the RMS error norm.

    On exit ``stage`` holds the fifth-order solution and ``K[6]`` its slope.
    """
    n = y.size
    for s in range(1, 7):
        for i in range(n):
            acc = y[i]
            for j in range(s):
                a = A[s, j]
                if a != 0.0:
                    acc += h * a * K[j, i]
            stage[i] = acc
        _rhs_jit(stage, b, dx, code, p1, p2, g, K[s])
    tot = 0.0
    for i in range(1, n - 1):
        e = 0.0
        for j in range(7):
            if E[j] != 0.0:
                e += h * E[j] * K[j, i]
        sc = atol + rtol * max(abs(y[i]), abs(stage[i]))
        tot += (e / sc) ** 2
    return math.sqrt(tot / (n - 2))


class _NumpyStepper:
    """Dormand-Prince stages in plain numpy; works for any ``F``."""

    def __init__(self, b, F, dx, opts):
        self.rhs = _fp_rhs_factory(b, F, dx)
        self.opts = opts
        self.k = [None] * 7
        self.y_new = None

    def start(self, y):
        self.k[0] = self.rhs(y)

    def step(self, y, h) -> float:
        k = self.k
        for s in range(1, 7):
            acc = y.copy()
            for j, a in enumerate(_A[s]):
                if a:
                    acc += (h * a) * k[j]
            k[s] = self.rhs(acc)
        self.y_new = acc  # last stage abscissa is the fifth-order solution
        err = np.zeros_like(y)
        for j, e in enumerate(_E):
            if e:
                err += (h * e) * k[j]
        scale = self.opts.abs_tol + self.opts.rel_tol * np.maximum(np.abs(y), np.abs(acc))
        r = err[1:-1] / scale[1:-1]
        return float(np.sqrt(np.mean(r * r)))

    def accept(self):
        self.k[0] = self.k[6]
        y, self.y_new = self.y_new, None
        return y


class _JitStepper:
    def __init__(self, b, F, dx, opts):
        n = b.size
        self.b = np.ascontiguousarray(b, dtype=float)
        self.dx = dx
        if not np.any(b):
            self.code, self.p1, self.p2 = _ZERO_DRIFT, 0.0, 0.0
        else:
            self.code = _F_CODES[F.kind]
            self.p1 = F.amplitude if F.kind == "sine" else F.steepness
            self.p2 = F.center
        self.atol, self.rtol = opts.abs_tol, opts.rel_tol
        self.K = np.zeros((7, n))
        self.A = np.zeros((7, 7))
        for s, row in enumerate(_A):
            self.A[s, : len(row)] = row
        self.E = np.array(_E)
        self.stage = np.empty(n)
        self.g = np.empty(n)

    def start(self, y):
        _rhs_jit(y, self.b, self.dx, self.code, self.p1, self.p2, self.g, self.K[0])

    def step(self, y, h) -> float:
        return _dp_step_jit(
            y, h, self.K, self.A, self.E, self.b, self.dx, self.code, self.p1, self.p2,
            self.atol, self.rtol, self.stage, self.g,
        )

    def accept(self):
        self.K[0] = self.K[6]
        y = self.stage
        self.stage = np.empty_like(y)
        return y


def _initial_step(rhs, y0, f0, opts: FpSolverOptions, span: float) -> float:
    scale = opts.abs_tol + opts.rel_tol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span, opts.max_step)
    f1 = rhs(y0 + h0 * f0)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, span, opts.max_step)


def solve_fp(
    rho0: GridFunction,
    bN: GridFunction,
    F: NonlinearF,
    T: float,
    opts: FpSolverOptions | None = None,
    backend: str = "auto",
) -> tuple[SpaceTimeField, FpDiagnostics]:
    """Integrate the regularised Fokker-Planck equation up to ``T``.

    Interior nodes use the second-difference Laplacian and a central
    difference of the flux ``Ft(rho) b``; boundary nodes stay at zero.
    Output is stored at ``store_count`` equispaced times; the integrator
    lands exactly on each of them.

    ``backend="jit"`` runs the stages through numba (built-in ``F`` kinds
    only), ``"numpy"`` is the portable path; ``"auto"`` picks jit when it can.
    """
    opts = opts or FpSolverOptions()
    if rho0.grid != bN.grid:
        raise ValueError("rho0 and bN must live on the same grid")
    if not T > 0:
        raise ValueError(f"need T > 0, got {T}")
    if np.any(rho0.values < 0):
        raise ValueError("initial density must be nonnegative")
    m0 = total_mass(rho0)
    if abs(m0 - 1.0) > 1e-3:
        raise ValueError(f"initial density mass {m0} is not within 1e-3 of 1")
    if backend == "auto":
        backend = "numpy" if F.kind == "custom" else "jit"
    if backend == "jit" and F.kind == "custom":
        raise ValueError("the jit backend does not support custom F")
    if backend not in ("jit", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")

    grid = rho0.grid
    stepper_cls = _JitStepper if backend == "jit" else _NumpyStepper
    stepper = stepper_cls(bN.values, F, grid.dx, opts)
    times = np.linspace(0.0, T, opts.store_count)
    times[-1] = T
    store = np.empty((opts.store_count, grid.n))
    y = rho0.values.copy()
    y[0] = y[-1] = 0.0
    store[0] = y

    eps = np.finfo(float).eps
    safety, fac_min, fac_max = 0.9, 0.2, 10.0
    beta = 0.04
    alpha = 0.2 - 0.75 * beta
    err_prev = 1e-4

    rhs = _fp_rhs_factory(bN.values, F, grid.dx)
    stepper.start(y)
    h = _initial_step(rhs, y, rhs(y), opts, T)
    nfev = 3
    t = 0.0
    accepted = rejected = 0
    out_idx = 1

    def _abort(msg):
        masses = np.trapezoid(store[:out_idx], dx=grid.dx, axis=1)
        diag = FpDiagnostics(masses, float(store[:out_idx].min()), accepted, rejected, nfev, t)
        raise FpSolverError(msg, t, diag)

    while out_idx < opts.store_count:
        target = times[out_idx]
        h = min(h, opts.max_step)
        if h < 16 * eps * max(1.0, abs(t)):
            _abort("step size underflow")
        landing = t + h >= target - 16 * eps * max(1.0, abs(target))
        h_free = h
        if landing:
            h = target - t

        err_norm = stepper.step(y, h)
        nfev += 6
        if not math.isfinite(err_norm):
            _abort("non-finite state")

        if err_norm <= 1.0:
            err_norm = max(err_norm, 1e-10)
            fac = safety * err_norm**-alpha * err_prev**beta
            fac = min(fac_max, max(fac_min, fac))
            if not landing:
                err_prev = err_norm
            t = target if landing else t + h
            y = stepper.accept()
            accepted += 1
            # a step shortened to land on an output time must not shrink the next one
            h = h_free if landing else h * fac
            if landing:
                store[out_idx] = y
                out_idx += 1
        else:
            rejected += 1
            h = h * max(fac_min, safety * err_norm**-alpha)

    field = SpaceTimeField(grid, times, store)
    masses = np.trapezoid(store, dx=grid.dx, axis=1)
    diag = FpDiagnostics(masses, float(store.min()), accepted, rejected, nfev, t)
    return field, diag
