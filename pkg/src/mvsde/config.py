"""Experiment configuration: INI-style text with one level of sections.

Top-level keys may appear before any section header; they belong to
``[experiment]``. The nonlinearity lives in ``[F]`` (more can be listed as
``[F.1]``, ``[F.2]``, ... for density comparisons; these add to ``[F]``) and solver settings in
``[pde]``. Values are Python literals (numbers, lists, ``true``/``false``)
or bare words.
"""

from __future__ import annotations

import ast
import configparser
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

from .fokker_planck import FpSolverOptions, NonlinearF

ACCEPTANCE_SEED = 20240917
DEFAULT_LAMBDA = 0.01
DRIFT_OVERRIDES = ("none", "zero", "constant")


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def default_lambda(beta: float) -> float:
    """0.01, pulled to the middle of ``(0, 1/2 - beta)`` when 0.01 is not admissible."""
    return round(min(DEFAULT_LAMBDA, 0.5 * (0.5 - beta)), 12)


@dataclass(frozen=True)
class ExperimentConfig:
    beta: float
    lam: float | None = None
    hurst: float | None = None
    T: float = 1.0
    L: float = 10.0
    n_space: int = 4001
    m_ref: int = 2**11
    levels: tuple[int, ...] = (2**7, 2**8, 2**9)
    n_paths: int = 10_000
    n_runs: int = 1
    fixed_drift: bool = True
    F: tuple[NonlinearF, ...] = (NonlinearF("sine"),)
    seed: int = ACCEPTANCE_SEED
    pde: FpSolverOptions = field(default_factory=FpSolverOptions)
    drift_override: str = "none"
    drift_constant: float = 1.0
    shared_density: bool = False

    def __post_init__(self):
        if not 0 < self.beta < 0.5:
            raise ConfigError("beta", f"must lie in (0, 1/2), got {self.beta}")
        if self.lam is None:
            object.__setattr__(self, "lam", default_lambda(self.beta))
        if not 0 < self.lam < 0.5 - self.beta:
            raise ConfigError("lambda", f"must lie in (0, {0.5 - self.beta:g}) for beta={self.beta}, got {self.lam}")
        if self.hurst is None:
            object.__setattr__(self, "hurst", round(1.0 - self.beta, 12))
        if not 0.5 < self.hurst < 1:
            raise ConfigError("hurst", f"must lie in (1/2, 1), got {self.hurst}")
        if not self.T > 0:
            raise ConfigError("T", "must be positive")
        if not self.L > 0:
            raise ConfigError("L", "must be positive")
        if self.n_space < 3:
            raise ConfigError("n_space", "need at least 3 nodes")
        object.__setattr__(self, "levels", tuple(int(m) for m in self.levels))
        for m in self.levels:
            if m < 1 or self.m_ref % m:
                raise ConfigError("levels", f"level {m} does not divide m_ref={self.m_ref}")
        if len(set(self.levels)) != len(self.levels):
            raise ConfigError("levels", "levels must be distinct")
        if self.n_paths < 8:
            raise ConfigError("n_paths", "need at least 8 paths")
        if self.n_runs < 1:
            raise ConfigError("n_runs", "need at least one run")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "must be a 64-bit unsigned integer")
        if not self.F:
            raise ConfigError("F", "at least one nonlinearity is required")
        if self.drift_override not in DRIFT_OVERRIDES:
            raise ConfigError("drift_override", f"must be one of {DRIFT_OVERRIDES}")

    @property
    def nonlinearity(self) -> NonlinearF:
        return self.F[0]

    def replace(self, **changes) -> ExperimentConfig:
        return dataclasses.replace(self, **changes)


# config file key -> dataclass field
_EXPERIMENT_KEYS = {
    "beta": "beta",
    "lambda": "lam",
    "hurst": "hurst",
    "T": "T",
    "L": "L",
    "n_space": "n_space",
    "m_ref": "m_ref",
    "levels": "levels",
    "n_paths": "n_paths",
    "n_runs": "n_runs",
    "fixed_drift": "fixed_drift",
    "seed": "seed",
    "drift_override": "drift_override",
    "drift_constant": "drift_constant",
    "shared_density": "shared_density",
}
_F_KEYS = ("kind", "amplitude", "steepness", "center")
_PDE_KEYS = ("abs_tol", "rel_tol", "max_step", "store_count", "boundary")

PROFILES = {
    "paper": {
        "T": 1.0,
        "L": 10.0,
        "n_space": 4001,
        "m_ref": 2**11,
        "levels": [2**7, 2**8, 2**9],
        "n_paths": 10_000,
        "store_count": 2**11 + 1,
    },
    "smoke": {"n_paths": 1000},
}


def parse_value(text: str):
    s = text.strip()
    low = s.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("inf", "+inf"):
        return math.inf
    try:
        return ast.literal_eval(s)
    except (ValueError, SyntaxError):
        return s


def _read_sections(text: str) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys are case sensitive (T, L)
    body = text
    first = next((ln.strip() for ln in text.splitlines() if ln.strip() and not ln.strip().startswith(("#", ";"))), "")
    if not first.startswith("["):
        body = "[experiment]\n" + text
    try:
        parser.read_string(body)
    except configparser.Error as e:
        raise ConfigError("<syntax>", str(e)) from None
    return {name: dict(parser[name]) for name in parser.sections()}


def _build(sections: dict[str, dict], overrides: dict | None = None, profile: str | None = None) -> ExperimentConfig:
    exp: dict = {}
    pde: dict = {}
    f_tables: dict[str, dict] = {}
    for name, items in sections.items():
        if name == "experiment":
            for k, v in items.items():
                if k not in _EXPERIMENT_KEYS:
                    raise ConfigError(k, "unknown key")
                exp[k] = parse_value(v) if isinstance(v, str) else v
        elif name == "pde":
            for k, v in items.items():
                if k not in _PDE_KEYS:
                    raise ConfigError(f"pde.{k}", "unknown key")
                pde[k] = parse_value(v) if isinstance(v, str) else v
        elif name == "F" or name.startswith("F."):
            for k in items:
                if k not in _F_KEYS:
                    raise ConfigError(f"{name}.{k}", "unknown key")
            f_tables[name] = {k: parse_value(v) if isinstance(v, str) else v for k, v in items.items()}
        else:
            raise ConfigError(name, "unknown section")

    layers = []
    if profile is not None:
        if profile not in PROFILES:
            raise ConfigError("profile", f"unknown profile {profile!r}")
        layers.append(PROFILES[profile])
    if overrides:
        layers.append(overrides)
    for layer in layers:
        for k, v in layer.items():
            if k in _EXPERIMENT_KEYS:
                exp[k] = v
            elif k in _PDE_KEYS:
                pde[k] = v
            elif k.startswith("pde.") and k[4:] in _PDE_KEYS:
                pde[k[4:]] = v
            elif "." in k and k.split(".")[-1] in _F_KEYS:
                table, key = k.rsplit(".", 1)
                f_tables.setdefault(table, {})[key] = v
            else:
                raise ConfigError(k, "unknown key")

    if "beta" not in exp:
        raise ConfigError("beta", "required key is missing")
    kwargs = {_EXPERIMENT_KEYS[k]: v for k, v in exp.items()}
    if "levels" in kwargs:
        lv = kwargs["levels"]
        if not isinstance(lv, (list, tuple)):
            lv = [lv]
        kwargs["levels"] = tuple(lv)
    for k in ("n_space", "m_ref", "n_paths", "n_runs", "seed"):
        if k in kwargs:
            v = kwargs[k]
            if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
                raise ConfigError(k, f"must be an integer, got {v!r}")
            kwargs[k] = int(v)
    for k in ("beta", "lam", "hurst", "T", "L", "drift_constant"):
        if k in kwargs and (isinstance(kwargs[k], bool) or not isinstance(kwargs[k], (int, float))):
            raise ConfigError(k, f"must be a number, got {kwargs[k]!r}")
    try:
        kwargs["pde"] = FpSolverOptions(**pde)
    except (TypeError, ValueError) as e:
        raise ConfigError("pde", str(e)) from None
    if f_tables:
        f_tables.setdefault("F", {})  # [F.k] tables add to the primary [F], never replace it
        order = sorted(f_tables, key=lambda n: (n != "F", int(n[2:]) if n[2:].isdigit() else n))
        try:
            kwargs["F"] = tuple(NonlinearF(**f_tables[n]) for n in order)
        except (TypeError, ValueError) as e:
            raise ConfigError("F", str(e)) from None
    try:
        return ExperimentConfig(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError("experiment", str(e)) from None


def parse_config(text: str = "", overrides: dict | None = None, profile: str | None = None) -> ExperimentConfig:
    """Resolve config text, then apply a profile, then individual overrides."""
    return _build(_read_sections(text), overrides, profile)


def load_config(path, overrides: dict | None = None, profile: str | None = None) -> ExperimentConfig:
    return parse_config(Path(path).read_text(), overrides, profile)


def parse_override(item: str) -> tuple[str, object]:
    if "=" not in item:
        raise ConfigError(item, "override must look like key=value")
    k, v = item.split("=", 1)
    return k.strip(), parse_value(v)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "inf" if v == math.inf else repr(v)
    if isinstance(v, tuple):
        return repr(list(v))
    return str(v)


def config_to_text(cfg: ExperimentConfig) -> str:
    """Fully resolved config; parsing it back yields an equal config."""
    inv = {v: k for k, v in _EXPERIMENT_KEYS.items()}
    lines = ["[experiment]"]
    for f in dataclasses.fields(cfg):
        if f.name in inv:
            lines.append(f"{inv[f.name]} = {_fmt(getattr(cfg, f.name))}")
    lines.append("")
    lines.append("[pde]")
    for k in _PDE_KEYS:
        lines.append(f"{k} = {_fmt(getattr(cfg.pde, k))}")
    for i, F in enumerate(cfg.F):
        lines.append("")
        lines.append("[F]" if i == 0 else f"[F.{i}]")
        for k in _F_KEYS:
            lines.append(f"{k} = {_fmt(getattr(F, k))}")
    return "\n".join(lines) + "\n"
