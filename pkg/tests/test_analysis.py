import datetime as dt
import itertools
import math

import numpy as np
import pytest
from scipy.special import expit

from mobkit.analysis import (
    N_GRID,
    R_GRID,
    Z_GRID,
    FitFailureError,
    UndefinedCorrelationError,
    beta_regression_gradient,
    beta_regression_loglik,
    correlate,
    fit_beta_regression,
    penetration,
    sensitivity_sweep,
)
from mobkit.geodesy import EARTH_RADIUS_KM
from mobkit.ingest import ReferenceIndexSeries

from conftest import START, make_table, obs, rect_region

KM_PER_DEG = EARTH_RADIUS_KM * math.pi / 180.0


def dates_from(start, count):
    return [start + dt.timedelta(days=i) for i in range(count)]


def series(values, start=START):
    return {start + dt.timedelta(days=i): float(v) for i, v in enumerate(values)}


# ---------------------------------------------------------------------------
# correlation
# ---------------------------------------------------------------------------


def test_perfect_linear_relation_has_absolute_correlation_one():
    x = series([1.0, 2.0, 3.0, 4.0])
    y = {d: 2.0 * v + 3.0 for d, v in x.items()}
    result = correlate(x, y, country_code="IT", metric="M1", index_name="transit_stations")
    assert result.abs_correlation == pytest.approx(1.0, abs=1e-12)
    assert result.paired_days == 4
    assert (result.country_code, result.metric, result.index_name, result.q) == (
        "IT",
        "M1",
        "transit_stations",
        1,
    )


def test_perfect_anticorrelation_also_gives_one():
    x = series([1.0, 5.0, 2.0, 8.0])
    y = {d: -v for d, v in x.items()}
    result = correlate(x, y, country_code="IT", metric="M2", index_name="residential")
    assert result.abs_correlation == pytest.approx(1.0, abs=1e-12)


def test_correlation_uses_only_shared_dates():
    x = series([1.0, 2.0, 3.0, 100.0])
    y = series([2.0, 4.0, 6.0])  # one day shorter; the outlier day is unmatched
    result = correlate(x, y, country_code="IT", metric="M1", index_name="transit_stations")
    assert result.paired_days == 3
    assert result.abs_correlation == pytest.approx(1.0, abs=1e-12)


def test_correlation_is_affine_invariant():
    rng = np.random.default_rng(3)
    x = series(rng.normal(size=12))
    y = series(rng.normal(size=12))
    base = correlate(x, y, country_code="IT", metric="M1", index_name="i").abs_correlation
    shifted = {d: -4.0 * v + 2.5 for d, v in x.items()}
    transformed = correlate(
        shifted, y, country_code="IT", metric="M1", index_name="i"
    ).abs_correlation
    assert transformed == pytest.approx(base, abs=1e-12)


def test_constant_series_is_undefined():
    x = series([5.0, 5.0, 5.0, 5.0])
    y = series([1.0, 2.0, 3.0, 4.0])
    with pytest.raises(UndefinedCorrelationError, match="zero variance"):
        correlate(x, y, country_code="IT", metric="M1", index_name="i")


def test_fewer_than_three_pairs_is_undefined():
    x = series([1.0, 2.0])
    y = series([2.0, 1.0])
    with pytest.raises(UndefinedCorrelationError, match="only 2 paired days"):
        correlate(x, y, country_code="IT", metric="M1", index_name="i")


def test_disjoint_dates_is_undefined():
    x = series([1.0, 2.0, 3.0])
    y = series([1.0, 2.0, 3.0], start=START + dt.timedelta(days=100))
    with pytest.raises(UndefinedCorrelationError, match="only 0 paired days"):
        correlate(x, y, country_code="IT", metric="M1", index_name="i")


def test_correlation_never_exceeds_one():
    rng = np.random.default_rng(17)
    for _ in range(20):
        n = int(rng.integers(3, 15))
        x = series(rng.normal(size=n))
        y = series(rng.normal(size=n))
        result = correlate(x, y, country_code="IT", metric="M1", index_name="i")
        assert 0.0 <= result.abs_correlation <= 1.0


# ---------------------------------------------------------------------------
# penetration
# ---------------------------------------------------------------------------


def test_penetration_average_daily_sample_over_population():
    period = dates_from(START, 10)
    sizes = {d: 1500 for d in period}
    record = penetration(sizes, period, 15_000_000.0, "IT")
    assert record.penetration == pytest.approx(1e-4, abs=1e-18)
    assert record.average_sample_size == 1500.0
    assert record.country_code == "IT"


def test_penetration_counts_missing_days_as_zero():
    period = dates_from(START, 2)
    sizes = {period[1]: 200}
    record = penetration(sizes, period, 1_000_000.0)
    assert record.average_sample_size == 100.0
    assert record.penetration == pytest.approx(1e-4, abs=1e-18)


def test_penetration_can_reach_one():
    record = penetration({START: 1}, [START], 1.0)
    assert record.penetration == 1.0


def test_penetration_validation():
    with pytest.raises(ValueError, match="period"):
        penetration({}, [], 100.0)
    with pytest.raises(ValueError, match="population"):
        penetration({START: 1}, [START], 0.0)


# ---------------------------------------------------------------------------
# beta regression: gradient and fit
# ---------------------------------------------------------------------------


def test_analytic_gradient_matches_finite_differences():
    rng = np.random.default_rng(29)
    for _ in range(10):
        n = int(rng.integers(5, 30))
        x = rng.uniform(-5.0, -1.0, size=n)
        y = rng.uniform(0.05, 0.95, size=n)
        theta = np.array(
            [rng.normal(0.0, 2.0), rng.normal(0.0, 1.0), float(rng.uniform(0.5, 60.0))]
        )
        analytic = beta_regression_gradient(theta, x, y)
        numeric = np.empty(3)
        for k in range(3):
            h = 1e-6 * max(1.0, abs(theta[k]))
            up = theta.copy()
            up[k] += h
            down = theta.copy()
            down[k] -= h
            numeric[k] = (
                beta_regression_loglik(up, x, y) - beta_regression_loglik(down, x, y)
            ) / (2.0 * h)
        np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-6)


def _model_sample(rng, beta0, beta1, phi, n=40):
    x = rng.uniform(-5.0, -2.0, size=n)
    mu = expit(beta0 + beta1 * x)
    y = rng.beta(mu * phi, (1.0 - mu) * phi)
    return 10.0**x, y


def test_fit_recovers_a_strong_positive_slope():
    rng = np.random.default_rng(41)
    pi, y = _model_sample(rng, beta0=5.0, beta1=0.8, phi=200.0, n=300)
    fit = fit_beta_regression(pi, y)
    assert fit.beta1 == pytest.approx(0.8, abs=0.15)
    assert fit.beta0 == pytest.approx(5.0, abs=0.6)
    assert fit.lr_statistic > 10.0
    assert fit.p_value < 0.001
    assert fit.pseudo_r2 > 0.3


def test_fit_internal_consistency():
    rng = np.random.default_rng(43)
    pi, y = _model_sample(rng, beta0=2.0, beta1=0.5, phi=30.0, n=50)
    fit = fit_beta_regression(pi, y)
    assert fit.loglik >= fit.loglik_const  # full model nests the constant one
    assert np.all((fit.fitted > 0.0) & (fit.fitted < 1.0))
    np.testing.assert_allclose(fit.fitted, expit(fit.beta0 + fit.beta1 * np.log10(pi)))
    assert fit.lr_statistic >= 0.0
    assert 0.0 <= fit.p_value <= 1.0
    assert 0.0 <= fit.pseudo_r2 <= 1.0 + 1e-12
    assert fit.f_statistic == fit.lr_statistic
    assert fit.n_points == 50
    clamp_consistent = math.isclose(
        beta_regression_loglik(
            (fit.beta0, fit.beta1, fit.phi),
            np.log10(pi),
            np.clip(y, 1e-6, 1.0 - 1e-6),
        ),
        fit.loglik,
        rel_tol=1e-9,
    )
    assert clamp_consistent


def test_fit_handles_pure_noise_without_inventing_signal():
    rng = np.random.default_rng(47)
    pi = np.geomspace(1e-5, 1e-2, 24)
    y = rng.beta(40.0, 10.0, size=24)  # no dependence on penetration
    fit = fit_beta_regression(pi, y)
    assert fit.lr_statistic < 8.0
    assert fit.p_value > 0.004


def test_fit_accepts_responses_on_the_boundary():
    pi = np.geomspace(1e-5, 1e-2, 8)
    y = np.array([0.0, 0.2, 0.4, 0.5, 0.6, 0.8, 0.9, 1.0])
    fit = fit_beta_regression(pi, y)
    assert np.isfinite(fit.loglik)
    assert fit.beta1 > 0


def test_fit_input_validation():
    with pytest.raises(FitFailureError, match="at least 3 points"):
        fit_beta_regression([1e-4, 1e-3], [0.5, 0.6])
    with pytest.raises(ValueError, match="equally long"):
        fit_beta_regression([1e-4, 1e-3, 1e-2], [0.5, 0.6])
    with pytest.raises(ValueError, match="positive and finite"):
        fit_beta_regression([1e-4, 0.0, 1e-2], [0.5, 0.6, 0.7])
    with pytest.raises(ValueError, match="finite"):
        fit_beta_regression([1e-4, 1e-3, 1e-2], [0.5, float("nan"), 0.7])


# ---------------------------------------------------------------------------
# sensitivity sweep
# ---------------------------------------------------------------------------


def _sweep_world(days=6, devices=5, observations=16):
    """All device-days have 16 fixes spanning 18 h, so every grid n qualifies."""
    table = make_table([rect_region("AAA", "unit", 0.0, 0.0, 1.0, 1.0, 1000.0)])
    dates = dates_from(START, days)
    records = []
    for i in range(devices):
        home_lat = 0.3 + 0.05 * i
        for t, day in enumerate(dates):
            stationary = (i + t) % 3 == 0
            step_deg = 0.05 * (1 + t) / KM_PER_DEG
            for k in range(observations):
                seconds = 4 * 3600 + k * (18 * 3600) // (observations - 1)
                lat = home_lat if (stationary or k % 2 == 0) else home_lat + step_deg
                timestamp = dt.datetime.combine(day, dt.time()) + dt.timedelta(seconds=seconds)
                records.append(obs(f"dev{i}", lat, 0.5, 10.0, timestamp.isoformat()))
    return records, table, dates


def _index(name, values, dates):
    return ReferenceIndexSeries("AAA", name, {d: float(v) for d, v in zip(dates, values)})


def test_sweep_emits_the_full_grid_in_nesting_order():
    records, table, dates = _sweep_world()
    transit = _index("transit_stations", [3 * t - 10 for t in range(len(dates))], dates)
    residential = _index("residential", [2, 1, 2, 2, 1, 2], dates)
    cells = sensitivity_sweep(records, table, "AAA", transit, residential, dates)
    assert len(cells) == 60
    assert [(c.n, c.r, c.z) for c in cells] == list(itertools.product(N_GRID, R_GRID, Z_GRID))
    assert all(c.rho1_abs is not None and c.rho2_abs is not None for c in cells)
    assert all(0.0 <= c.rho1_abs <= 1.0 and 0.0 <= c.rho2_abs <= 1.0 for c in cells)


def test_sweep_cells_identical_when_qualification_is_not_binding():
    records, table, dates = _sweep_world()
    transit = _index("transit_stations", [3 * t - 10 for t in range(len(dates))], dates)
    residential = _index("residential", [2, 1, 2, 2, 1, 2], dates)
    cells = sensitivity_sweep(records, table, "AAA", transit, residential, dates)
    by_key = {}
    for cell in cells:
        by_key.setdefault((cell.r, cell.z), []).append((cell.rho1_abs, cell.rho2_abs))
    for values in by_key.values():
        assert len(values) == len(N_GRID)
        assert all(v == values[0] for v in values)  # exact: same inputs, same arithmetic


def test_sweep_with_constant_index_yields_none_cells_but_full_grid():
    records, table, dates = _sweep_world()
    transit = _index("transit_stations", [-50] * len(dates), dates)
    residential = _index("residential", [-50] * len(dates), dates)
    cells = sensitivity_sweep(records, table, "AAA", transit, residential, dates)
    assert len(cells) == 60
    assert all(c.rho1_abs is None and c.rho2_abs is None for c in cells)


def test_sweep_correlations_track_a_constructed_signal():
    records, table, dates = _sweep_world()
    # M1 grows linearly in t by construction, so a linear index correlates fully
    transit = _index("transit_stations", list(range(len(dates))), dates)
    residential = _index("residential", [2, 1, 2, 2, 1, 2], dates)
    cells = sensitivity_sweep(records, table, "AAA", transit, residential, dates)
    defaults = next(c for c in cells if (c.n, c.r, c.z) == (12, 1.0, 0.2))
    # the moving-device fraction wobbles day to day, so the match is strong, not perfect
    assert defaults.rho1_abs > 0.9
    assert defaults.rho2_abs > 0.95
