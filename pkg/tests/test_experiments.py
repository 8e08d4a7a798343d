import csv
import math

import numpy as np
import pytest

from mvsde.analysis import RatePlan, rate_limit
from mvsde.config import parse_config
from mvsde.experiments import (
    NumericalFailure,
    run_density_compare,
    run_drift_gen,
    run_rate_sweep,
    smoothing_levels,
)

SMALL = """
beta = 0.3
L = 7
n_space = 561
m_ref = 256
levels = [32, 64, 128]
n_paths = 400

[pde]
store_count = 65
"""


def small(**overrides):
    return parse_config(SMALL, overrides)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_smoothing_levels_follow_kappa():
    cfg = small()
    kappa = RatePlan(cfg.beta, cfg.lam).kappa
    for m, N in smoothing_levels(cfg).items():
        assert N == round(m**kappa)


def test_drift_gen_outputs(tmp_path):
    res = run_drift_gen(small())
    files = res.write(tmp_path)
    assert {f.name for f in files} == {"fbm_path.csv", "drift.csv", "config_echo.ini"}
    header = (tmp_path / "drift.csv").read_text().splitlines()[0].split(",")
    Ns = sorted(set(smoothing_levels(small()).values()))
    assert header == ["x", "h"] + [f"bN_{N:g}" for N in Ns]
    data = np.loadtxt(tmp_path / "drift.csv", delimiter=",", skiprows=1)
    assert data.shape == (561, 2 + len(Ns))
    assert parse_config((tmp_path / "config_echo.ini").read_text()) == small()


def test_drift_gen_is_bitwise_reproducible(tmp_path):
    run_drift_gen(small()).write(tmp_path / "a")
    run_drift_gen(small()).write(tmp_path / "b")
    for name in ("fbm_path.csv", "drift.csv", "config_echo.ini"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_drift_gen_seed_changes_path():
    a = run_drift_gen(small()).h.values
    b = run_drift_gen(small(seed=1)).h.values
    assert not np.array_equal(a, b)


def test_density_compare_outputs(tmp_path):
    cfg = parse_config(SMALL + "\n[F.1]\nkind = cosine\n")
    res = run_density_compare(cfg)
    res.write(tmp_path)
    rows = read_csv(tmp_path / "ks.csv")
    assert [r["F"] for r in rows] == ["sine", "cosine"]
    for r in rows:
        assert 0 <= float(r["statistic"]) <= 1 and 0 <= float(r["p_value"]) <= 1
        assert int(r["n"]) == 400
    for sub in ("F0_sine", "F1_cosine"):
        assert (tmp_path / sub / "rho_T.csv").exists()
        assert (tmp_path / sub / "terminal_ref.csv").exists()
        assert "accepted_steps=" in (tmp_path / sub / "fp_diagnostics.txt").read_text()
    rerun = run_density_compare(cfg)
    assert rerun.cases[0].ks == res.cases[0].ks


def test_density_compare_zero_drift_against_analytic_law():
    res = run_density_compare(small(drift_override="zero", n_paths=2000))
    case = res.cases[0]
    assert case.ks_analytic.p_value > 0.05
    assert case.ks.p_value > 0.05


def test_density_compare_gate_failure():
    # on [-3.5, 3.5] the density leaks through the boundary within T = 1
    with pytest.raises(NumericalFailure):
        run_density_compare(small(L=3.5, n_space=281))


def test_rate_sweep_outputs(tmp_path):
    cfg = small(n_runs=2, fixed_drift=False)
    res = run_rate_sweep(cfg)
    files = res.write(tmp_path)
    errors = read_csv(tmp_path / "errors.csv")
    assert len(errors) == 6
    kappa = RatePlan(cfg.beta, cfg.lam).kappa
    for row in errors:
        assert float(row["N"]) == round(int(row["m"]) ** kappa)
        assert float(row["strong_error"]) > 0
    rates = read_csv(tmp_path / "rates.csv")
    assert [r["run"] for r in rates] == ["0", "1", "summary"]
    summary = rates[-1]
    assert float(summary["empirical_rate"]) == pytest.approx(np.mean([float(r["empirical_rate"]) for r in rates[:2]]))
    assert float(summary["rate_limit"]) == rate_limit(0.3)
    assert math.isfinite(float(summary["half_width_95"]))
    assert (tmp_path / "run_1" / "terminal_m64.csv").exists()
    # fresh drift per run means two distinct drift families were solved
    assert {k[0] for k in res.fp_diagnostics} == {0, 1}
    assert all(f.exists() for f in files)


def test_fixed_drift_solves_once():
    res = run_rate_sweep(small(n_runs=2))
    assert {k[0] for k in res.fp_diagnostics} == {0}
    assert res.runs[0].errors != res.runs[1].errors


def test_rate_sweep_is_deterministic(tmp_path):
    run_rate_sweep(small()).write(tmp_path / "a")
    run_rate_sweep(small()).write(tmp_path / "b")
    for name in ("errors.csv", "rates.csv", "run_0/terminal_ref.csv", "run_0/terminal_m32.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_shared_density_variant_runs():
    a = run_rate_sweep(small(shared_density=True))
    b = run_rate_sweep(small())
    assert len(a.fp_diagnostics) == 1
    assert len(b.fp_diagnostics) == len(set(smoothing_levels(small()).values()))
    assert a.runs[0].errors != b.runs[0].errors


def test_constant_drift_sweep_is_flagged_degenerate(tmp_path):
    res = run_rate_sweep(small(drift_override="constant"))
    assert res.runs[0].degenerate
    assert math.isnan(res.mean_rate)
    res.write(tmp_path)
    rows = read_csv(tmp_path / "rates.csv")
    assert rows[0]["degenerate"] == "1" and rows[0]["empirical_rate"] == "nan"


def test_rate_sweep_needs_two_levels():
    with pytest.raises(ValueError):
        run_rate_sweep(small(levels=[64]))


def test_theoretical_columns_order():
    assert rate_limit(0.49) < rate_limit(0.01)


def test_drift_gen_larger_N_is_rougher():
    res = run_drift_gen(parse_config("beta = 0.49"))
    Ns = sorted(res.drifts)
    stds = [res.drifts[N].values.std() for N in Ns]
    assert all(a < b for a, b in zip(stds, stds[1:]))


def test_drift_gen_echo_reports_hurst(tmp_path):
    run_drift_gen(small(beta=0.49)).write(tmp_path)
    assert "hurst = 0.51\n" in (tmp_path / "config_echo.ini").read_text()


@pytest.mark.slow
def test_small_beta_sweep_rate_in_range():
    res = run_rate_sweep(parse_config("beta = 0.01"))
    assert rate_limit(0.01) - 0.05 <= res.mean_rate <= 1.0
