import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy.stats import kstwobign, norm

from mvsde.analysis import (
    RatePlan,
    fit_rate,
    hurst_estimate,
    kolmogorov_sf,
    ks_statistic,
    ks_test,
    rate_limit,
    smoothing_level,
    strong_error,
    theoretical_kappa,
    theoretical_rate,
)
from mvsde.euler import LevelResult
from mvsde.grid import GridFunction, make_uniform_grid
from mvsde.randproc import SeedSpec, fbm_path

betas = st.floats(1e-4, 0.5 - 1e-4)


@st.composite
def beta_lambda(draw):
    b = draw(betas)
    # stay clear of the float edge where (1/2 - b - lam)**2 underflows against 1 + b
    lam = draw(st.floats(1e-6, 1 - 1e-6)) * (0.5 - b)
    assume(0 < lam < 0.5 - b)
    return b, lam


def test_kappa_hand_value():
    assert theoretical_kappa(0.25, 0.01) == pytest.approx(1 / 1.3652, rel=1e-12)
    assert round(theoretical_kappa(0.25, 0.01), 5) == 0.73249


def test_kappa_limit():
    assert theoretical_kappa(1e-9, 1e-9) == pytest.approx(2 / 3, abs=1e-8)


@pytest.mark.parametrize("beta,lam", [(0.0, 0.1), (0.5, 0.01), (0.2, 0.0), (0.2, 0.3), (-0.1, 0.1)])
def test_rejects_out_of_range(beta, lam):
    with pytest.raises(ValueError):
        theoretical_kappa(beta, lam)
    with pytest.raises(ValueError):
        theoretical_rate(beta, lam)


def test_rate_limit_rejects_out_of_range():
    for b in (0.0, 0.5, 0.7):
        with pytest.raises(ValueError):
            rate_limit(b)


@given(beta_lambda())
def test_kappa_and_rate_bounds(bl):
    b, lam = bl
    k = theoretical_kappa(b, lam)
    assert 0 < k < 1 / (1 + b)
    r = theoretical_rate(b, lam)
    assert 0 < r < rate_limit(b) < 1 / 6


@given(betas, st.floats(0.01, 0.98), st.floats(0.01, 0.98))
def test_kappa_increasing_rate_decreasing_in_lambda(b, u, v):
    assume(abs(u - v) > 1e-6)
    l1, l2 = sorted((u * (0.5 - b), v * (0.5 - b)))
    assume(0 < l1 < l2 < 0.5 - b)
    assert theoretical_kappa(b, l1) < theoretical_kappa(b, l2)
    assert theoretical_rate(b, l1) > theoretical_rate(b, l2)


def test_rate_decreasing_in_lambda_grid_at_0_3():
    lams = np.linspace(1e-4, 0.2 - 1e-4, 50)
    r = [theoretical_rate(0.3, l) for l in lams]
    assert np.all(np.diff(r) < 0)


def test_rate_limit_endpoints():
    assert rate_limit(1e-9) == pytest.approx(1 / 6, abs=1e-8)
    assert rate_limit(0.5 - 1e-9) == pytest.approx(0.0, abs=1e-8)
    assert rate_limit(0.49) < rate_limit(0.01)


def test_smoothing_level_rounds():
    plan = RatePlan(0.49, 0.005)
    assert plan.N(2048) == round(2048**plan.kappa)
    assert smoothing_level(1, 0.5) == 1.0
    assert smoothing_level(100, 0.5) == 10.0


def test_strong_error_examples():
    x = np.random.default_rng(0).normal(size=100)
    assert strong_error(x, x) == 0.0
    assert strong_error(x + 0.25, x) == pytest.approx(0.25)
    a = LevelResult(8, 1.0, x)
    assert strong_error(a, LevelResult(16, 1.0, x - 1.5)) == pytest.approx(1.5)
    with pytest.raises(ValueError):
        strong_error(x, x[:-1])


def test_fit_rate_examples():
    assert fit_rate([(10, 1e-1), (100, 1e-2)]).rate == pytest.approx(1.0, abs=1e-14)
    assert fit_rate([(8, 0.3), (16, 0.3), (32, 0.3)]).rate == 0.0
    rep = fit_rate([(m, 5 * m ** (-1 / 6)) for m in (128, 256, 512)], theoretical=0.1)
    assert abs(rep.rate - 1 / 6) < 1e-12
    assert rep.theoretical_rate == 0.1
    assert [p[0] for p in rep.points] == [128, 256, 512]


@given(st.floats(0.01, 2), st.floats(1e-6, 1e6), st.lists(st.integers(1, 2**20), min_size=2, max_size=6, unique=True))
def test_fit_rate_exact_on_power_laws(rate, c, ms):
    rep = fit_rate([(m, c * m ** (-rate)) for m in ms])
    assert abs(rep.rate - rate) < 1e-12 * max(1, rate) * 10
    assert abs(rep.intercept - math.log10(c)) < 1e-9


@pytest.mark.parametrize("pts", [[(8, 1.0)], [(8, 1.0), (8, 0.5)], [(8, 1.0), (16, 0.0)], [(8, 1.0), (16, -1.0)], [(0, 1.0), (4, 1.0)]])
def test_fit_rate_rejects_degenerate(pts):
    with pytest.raises(ValueError):
        fit_rate(pts)


def test_kolmogorov_sf_matches_reference():
    for lam in (0.05, 0.1, 0.19, 0.2, 0.3, 0.5, 0.8, 1.0, 1.36, 2.0, 3.0):
        assert kolmogorov_sf(lam) == pytest.approx(kstwobign.sf(lam), abs=1e-12)


@given(st.floats(0.2, 5))
def test_truncation_close_to_100_terms(lam):
    assert abs(kolmogorov_sf(lam) - kolmogorov_sf(lam, max_terms=100)) < 1e-10


def test_ks_quantile_stairs():
    g = make_uniform_grid(0, 1, 1001)
    cdf = GridFunction(g, g.nodes.copy())
    n = 200
    x = (np.arange(1, n + 1) - 0.5) / n
    assert abs(ks_test(x, cdf).statistic - 0.5 / n) < 1e-12


def test_ks_total_mismatch():
    g = make_uniform_grid(0, 1, 11)
    r = ks_test(np.full(20, -5.0), GridFunction(g, g.nodes.copy()))
    assert r.statistic == 1.0
    assert r.p_value < 1e-10


def test_ks_rejects_small_samples():
    with pytest.raises(ValueError):
        ks_test(np.zeros(7), norm.cdf)


@given(st.integers(0, 1000), st.floats(0.1, 10), st.floats(-10, 10))
@settings(max_examples=30)
def test_ks_invariant_under_affine_map(seed, a, b):
    x = np.random.default_rng(seed).normal(size=50)
    d1 = ks_statistic(x, norm.cdf)
    d2 = ks_statistic(a * x + b, lambda y: norm.cdf((y - b) / a))
    assert d1 == pytest.approx(d2, abs=1e-12)


@given(st.integers(0, 1000))
@settings(max_examples=30)
def test_ks_statistic_attained_at_sample(seed):
    x = np.sort(np.random.default_rng(seed).normal(size=30))
    D = ks_statistic(x, norm.cdf)
    F = norm.cdf(x)
    i = np.arange(1, x.size + 1)
    gaps = np.concatenate([i / x.size - F, F - (i - 1) / x.size])
    assert D in gaps
    assert 0 <= D <= 1


def test_ks_matches_scipy_statistic():
    from scipy.stats import kstest

    x = np.random.default_rng(3).normal(size=500)
    assert ks_statistic(x, norm.cdf) == pytest.approx(kstest(x, "norm").statistic, abs=1e-14)


def test_hurst_rejects_line_and_short_paths():
    dt = 1 / 2048
    with pytest.raises(ValueError):
        hurst_estimate(np.arange(2048) * dt, dt)
    with pytest.raises(ValueError):
        hurst_estimate(np.zeros(1000), 0.01)
    with pytest.raises(ValueError):
        hurst_estimate(np.zeros(2048))


def test_hurst_on_brownian_path():
    n = 2**14
    w = np.concatenate([[0], np.random.default_rng(7).normal(size=n - 1).cumsum()]) * math.sqrt(1 / n)
    assert abs(hurst_estimate(w, 1 / n) - 0.5) < 0.05


def test_hurst_on_fbm():
    p = fbm_path(SeedSpec(20240917, 1), 0.75, 2**14, 1 / 2**14)
    assert abs(hurst_estimate(p) - 0.75) < 0.05
