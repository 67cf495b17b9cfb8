"""Downstream analyses: correlation with external indices, penetration,
beta regression of correlation strength on penetration, and the parameter
sensitivity sweep.

The beta regression models |rho_i| ~ Beta(mu_i * phi, (1 - mu_i) * phi) with
logit(mu_i) = beta0 + beta1 * log10(penetration_i). The log-likelihood and its
analytic gradient are written out below; scipy's L-BFGS-B only drives the
maximization. The full model is compared against the intercept-only model with
a likelihood-ratio statistic referred to chi^2(1), reported alongside an
F-style variant (LR/1 on F(1, n-3)); both are labeled in outputs.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import optimize, stats
from scipy.special import digamma, expit, gammaln, logit

from .ingest import ObservationRecord, ReferenceIndexSeries, RegionTable
from .metrics import (
    EstimationParams,
    RegionalDailyAggregate,
    gate_distance_km,
    group_by_device_day,
    qualify_day,
    weighted_country_values,
)
from .geodesy import haversine_km, mean_coordinate
from .ingest import assign_region

RESPONSE_CLAMP = 1e-6
_PHI_BOUNDS = (1e-6, 1e7)
_MAX_ITERATIONS = 500
_LOGLIK_TOL = 1e-8

N_GRID = (3, 6, 9, 12, 15)
R_GRID = (1.0, 2.0, 3.0)
Z_GRID = (0.1, 0.2, 0.3, 0.4)


class UndefinedCorrelationError(Exception):
    """Correlation is undefined: fewer than 3 paired days or zero variance."""


class FitFailureError(Exception):
    """The beta regression could not be fit."""


@dataclass(frozen=True)
class CorrelationResult:
    country_code: str
    metric: str
    index_name: str
    q: int
    abs_correlation: float
    paired_days: int


def correlate(
    metric_series: Mapping[dt.date, float],
    index_series: Mapping[dt.date, float],
    *,
    country_code: str,
    metric: str,
    index_name: str,
    q: int = 1,
) -> CorrelationResult:
    """Absolute Pearson correlation over the date-matched pairs.

    Dates present in both series (inner join) are used; fewer than 3 pairs or
    a zero-variance side raises :class:`UndefinedCorrelationError`.
    """
    shared = sorted(set(metric_series) & set(index_series))
    if len(shared) < 3:
        raise UndefinedCorrelationError(
            f"only {len(shared)} paired days for {country_code}/{metric}/{index_name}"
        )
    x = np.array([metric_series[d] for d in shared], dtype=float)
    y = np.array([index_series[d] for d in shared], dtype=float)
    xc = x - x.mean()
    yc = y - y.mean()
    sx = float(np.sqrt((xc * xc).sum()))
    sy = float(np.sqrt((yc * yc).sum()))
    if sx == 0.0 or sy == 0.0:
        raise UndefinedCorrelationError(
            f"zero variance in {country_code}/{metric}/{index_name} over {len(shared)} days"
        )
    rho = float((xc * yc).sum()) / (sx * sy)
    rho = max(-1.0, min(1.0, rho))
    return CorrelationResult(country_code, metric, index_name, q, abs(rho), len(shared))


@dataclass(frozen=True)
class PenetrationRecord:
    country_code: str
    average_sample_size: float
    population: float
    penetration: float


def penetration(
    daily_sample_sizes: Mapping[dt.date, int],
    period: Sequence[dt.date],
    population: float,
    country_code: str = "",
) -> PenetrationRecord:
    """Mean daily qualifying-trajectory count over the period / population.

    Days of the period absent from ``daily_sample_sizes`` count as zero.
    """
    if not period:
        raise ValueError("period must contain at least one day")
    if not population > 0:
        raise ValueError("population must be positive")
    total = 0.0
    for day in period:
        total += daily_sample_sizes.get(day, 0)
    average = total / len(period)
    return PenetrationRecord(country_code, average, population, average / population)


# ---------------------------------------------------------------------------
# Beta regression
# ---------------------------------------------------------------------------


# At saturated linear predictors expit returns exactly 0 or 1, which would put
# zeros into the gammaln/digamma arguments (inf, and inf*0 = nan in gradients).
# Clamping keeps those probe points finite so the optimizer can back off;
# values strictly inside the band are untouched.
_MU_EPS = 1e-12


def beta_regression_loglik(params: Sequence[float], x: np.ndarray, y: np.ndarray) -> float:
    """Log-likelihood at (beta0, beta1, phi); x = log10(penetration), y in (0,1)."""
    beta0, beta1, phi = params
    mu = np.clip(expit(beta0 + beta1 * x), _MU_EPS, 1.0 - _MU_EPS)
    a = mu * phi
    b = (1.0 - mu) * phi
    terms = (
        gammaln(phi)
        - gammaln(a)
        - gammaln(b)
        + (a - 1.0) * np.log(y)
        + (b - 1.0) * np.log1p(-y)
    )
    return float(terms.sum())


def beta_regression_gradient(params: Sequence[float], x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Analytic gradient of :func:`beta_regression_loglik` in the same order."""
    beta0, beta1, phi = params
    mu = np.clip(expit(beta0 + beta1 * x), _MU_EPS, 1.0 - _MU_EPS)
    a = mu * phi
    b = (1.0 - mu) * phi
    log_y = np.log(y)
    log_1my = np.log1p(-y)
    ystar = log_y - log_1my
    mustar = digamma(a) - digamma(b)
    core = phi * (ystar - mustar) * mu * (1.0 - mu)
    g_beta0 = float(core.sum())
    g_beta1 = float((core * x).sum())
    g_phi = float(
        (
            digamma(phi)
            - mu * digamma(a)
            - (1.0 - mu) * digamma(b)
            + mu * log_y
            + (1.0 - mu) * log_1my
        ).sum()
    )
    return np.array([g_beta0, g_beta1, g_phi])


@dataclass(frozen=True)
class BetaRegressionFit:
    beta0: float
    beta1: float
    phi: float
    fitted: np.ndarray
    pseudo_r2: float
    loglik: float
    loglik_const: float
    lr_statistic: float
    p_value: float
    f_statistic: float
    p_value_f: float
    n_points: int


def _initial_values(y: np.ndarray) -> tuple[float, float]:
    """Spec'd starting point: beta0 = logit(mean y), phi by method of moments."""
    mean = float(y.mean())
    variance = float(y.var())
    beta0 = float(logit(mean))
    phi = mean * (1.0 - mean) / max(variance, 1e-12) - 1.0
    phi = min(max(phi, 0.1), 1e6)
    return beta0, phi


def _maximize(
    x: np.ndarray, y: np.ndarray, start: tuple[float, float, float], fit_slope: bool
) -> tuple[np.ndarray, float]:
    """Maximize the log-likelihood; returns (params, loglik)."""
    if fit_slope:

        def objective(theta: np.ndarray) -> float:
            return -beta_regression_loglik(theta, x, y)

        def gradient(theta: np.ndarray) -> np.ndarray:
            return -beta_regression_gradient(theta, x, y)

        theta0 = np.array(start, dtype=float)
        bounds = [(None, None), (None, None), _PHI_BOUNDS]
    else:

        def objective(theta: np.ndarray) -> float:
            return -beta_regression_loglik((theta[0], 0.0, theta[1]), x, y)

        def gradient(theta: np.ndarray) -> np.ndarray:
            g = beta_regression_gradient((theta[0], 0.0, theta[1]), x, y)
            return -np.array([g[0], g[2]])

        theta0 = np.array([start[0], start[2]], dtype=float)
        bounds = [(None, None), _PHI_BOUNDS]

    result = optimize.minimize(
        objective,
        theta0,
        jac=gradient,
        method="L-BFGS-B",
        bounds=bounds,
        options={"maxiter": _MAX_ITERATIONS, "ftol": _LOGLIK_TOL},
    )
    if not result.success:
        raise FitFailureError(
            f"optimizer did not converge after {result.nit} iterations: {result.message}"
        )
    if fit_slope:
        params = np.asarray(result.x, dtype=float)
    else:
        params = np.array([result.x[0], 0.0, result.x[1]], dtype=float)
    return params, float(-result.fun)


def fit_beta_regression(
    penetrations: Sequence[float], abs_correlations: Sequence[float]
) -> BetaRegressionFit:
    """Fit |rho| ~ Beta(mu*phi, (1-mu)*phi), logit(mu) linear in log10(penetration).

    Responses are clamped into [1e-6, 1 - 1e-6] first. Needs >= 3 points and
    strictly positive penetrations. The intercept-only model is fit for the
    model-comparison statistics; the full model is also restarted from the
    constant solution so its likelihood can never fall below it.
    """
    pi = np.asarray(penetrations, dtype=float)
    y = np.asarray(abs_correlations, dtype=float)
    if pi.shape != y.shape or pi.ndim != 1:
        raise ValueError("penetrations and correlations must be 1-d and equally long")
    if len(y) < 3:
        raise FitFailureError(f"need at least 3 points, got {len(y)}")
    if np.any(pi <= 0) or not np.all(np.isfinite(pi)):
        raise ValueError("penetrations must be positive and finite")
    if not np.all(np.isfinite(y)):
        raise ValueError("correlations must be finite")
    y = np.clip(y, RESPONSE_CLAMP, 1.0 - RESPONSE_CLAMP)
    x = np.log10(pi)

    beta0_start, phi_start = _initial_values(y)
    const_params, loglik_const = _maximize(x, y, (beta0_start, 0.0, phi_start), fit_slope=False)

    candidates = []
    try:
        candidates.append(_maximize(x, y, (beta0_start, 0.0, phi_start), fit_slope=True))
    except FitFailureError:
        pass
    try:
        candidates.append(
            _maximize(x, y, (const_params[0], 0.0, const_params[2]), fit_slope=True)
        )
    except FitFailureError:
        pass
    # The constant optimum itself is a valid full-model point (slope 0).
    candidates.append((const_params, loglik_const))
    params, loglik_full = max(candidates, key=lambda c: c[1])

    beta0, beta1, phi = (float(v) for v in params)
    fitted = expit(beta0 + beta1 * x)

    fc = fitted - fitted.mean()
    yc = y - y.mean()
    denom = float(np.sqrt((fc * fc).sum()) * np.sqrt((yc * yc).sum()))
    pseudo_r2 = float(((fc * yc).sum() / denom) ** 2) if denom > 0 else 0.0

    lr = max(2.0 * (loglik_full - loglik_const), 0.0)
    p_value = float(stats.chi2.sf(lr, 1))
    residual_df = len(y) - 3
    f_statistic = lr / 1.0
    p_value_f = float(stats.f.sf(f_statistic, 1, residual_df)) if residual_df > 0 else float("nan")

    return BetaRegressionFit(
        beta0=beta0,
        beta1=beta1,
        phi=phi,
        fitted=fitted,
        pseudo_r2=pseudo_r2,
        loglik=loglik_full,
        loglik_const=loglik_const,
        lr_statistic=lr,
        p_value=p_value,
        f_statistic=f_statistic,
        p_value_f=p_value_f,
        n_points=len(y),
    )


# ---------------------------------------------------------------------------
# Sensitivity sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepCell:
    """One grid point of the sweep; None marks an undefined correlation."""

    n: int
    r: float
    z: float
    rho1_abs: float | None
    rho2_abs: float | None


@dataclass(frozen=True)
class _DeviceDayCache:
    device_id: str
    date: dt.date
    region_id: str | None
    observation_count: int
    span_hours: float
    segment_km: np.ndarray
    uncertainty_a_m: np.ndarray
    uncertainty_b_m: np.ndarray


def _build_sweep_cache(
    records: Iterable[ObservationRecord], table: RegionTable, country_code: str
) -> list[_DeviceDayCache]:
    """Per device-day: raw segment lengths and endpoint uncertainties.

    Segment distances, spans, counts and region assignment do not depend on
    (n, r, z), so they are computed once and every grid point only re-applies
    qualification and gating.
    """
    cache: list[_DeviceDayCache] = []
    for device_id, by_day in group_by_device_day(records).items():
        for day in sorted(by_day):
            day_observations = by_day[day]
            following = by_day.get(day + dt.timedelta(days=1))
            pairs = list(zip(day_observations, day_observations[1:]))
            if following:
                pairs.append((day_observations[-1], following[0]))
            distances = np.array(
                [haversine_km(a.lat, a.lon, b.lat, b.lon) for a, b in pairs], dtype=float
            )
            u_a = np.array([a.uncertainty_m for a, _ in pairs], dtype=float)
            u_b = np.array([b.uncertainty_m for _, b in pairs], dtype=float)
            mean_lat, mean_lon = mean_coordinate(
                [o.lat for o in day_observations], [o.lon for o in day_observations]
            )
            region = assign_region((mean_lat, mean_lon), table)
            region_id = region.region_id if region and region.country_code == country_code else None
            span_seconds = (
                day_observations[-1].timestamp - day_observations[0].timestamp
            ).total_seconds()
            cache.append(
                _DeviceDayCache(
                    device_id=device_id,
                    date=day,
                    region_id=region_id,
                    observation_count=len(day_observations),
                    span_hours=span_seconds / 3600.0,
                    segment_km=distances,
                    uncertainty_a_m=u_a,
                    uncertainty_b_m=u_b,
                )
            )
    cache.sort(key=lambda c: (c.date.toordinal(), c.region_id or "", c.device_id))
    return cache


def _sweep_series(
    cache: Sequence[_DeviceDayCache],
    table: RegionTable,
    country_code: str,
    dates: Sequence[dt.date],
    n: int,
    r: float,
    z: float,
) -> tuple[dict[dt.date, float], dict[dt.date, float]]:
    """Country daily M1/M2 series for one (n, r, z) grid point.

    Qualification for the sweep couples the span to n: a device-day needs at
    least n observations spanning at least n hours.
    """
    date_set = set(dates)
    by_date: dict[dt.date, dict[str, list[tuple[float, int]]]] = {}
    for entry in cache:
        if entry.region_id is None or entry.date not in date_set:
            continue
        if entry.observation_count < n or entry.span_hours < float(n):
            continue
        if len(entry.segment_km) == 0:
            travelled = 0.0
        else:
            thresholds = (r * entry.uncertainty_a_m + r * entry.uncertainty_b_m) / 1000.0
            travelled = float(
                np.where(entry.segment_km >= thresholds, entry.segment_km, 0.0).sum()
            )
        flag = 1 if travelled < z else 0
        by_date.setdefault(entry.date, {}).setdefault(entry.region_id, []).append(
            (travelled, flag)
        )

    m1_series: dict[dt.date, float] = {}
    m2_series: dict[dt.date, float] = {}
    for day, regions in by_date.items():
        aggregates = []
        for region_id in sorted(regions):
            values = regions[region_id]
            count = len(values)
            travel_sum = 0.0
            for travelled, _ in values:
                travel_sum += travelled
            flag_sum = 0.0
            for _, flag in values:
                flag_sum += flag
            aggregates.append(
                RegionalDailyAggregate(
                    region_id=region_id,
                    country_code=country_code,
                    date=day,
                    mean_travelled_km=travel_sum / count,
                    stationary_fraction=flag_sum / count,
                    sample_size=count,
                )
            )
        values = weighted_country_values(aggregates, table, country_code)
        if values is not None:
            m1_series[day] = values[0]
            m2_series[day] = values[1]
    return m1_series, m2_series


def sensitivity_sweep(
    records: Iterable[ObservationRecord],
    table: RegionTable,
    country_code: str,
    transit_series: ReferenceIndexSeries,
    residential_series: ReferenceIndexSeries,
    dates: Sequence[dt.date],
    n_grid: Sequence[int] = N_GRID,
    r_grid: Sequence[float] = R_GRID,
    z_grid: Sequence[float] = Z_GRID,
) -> list[SweepCell]:
    """|rho| of (M1 vs transit) and (M2 vs residential) over the (n, r, z) grid.

    Emits one cell per grid point in (n, r, z) nesting order; grid points whose
    correlation is undefined carry None rather than failing the sweep.
    """
    cache = _build_sweep_cache(records, table, country_code)
    cells: list[SweepCell] = []
    for n in n_grid:
        for r in r_grid:
            for z in z_grid:
                m1_series, m2_series = _sweep_series(
                    cache, table, country_code, dates, n, r, z
                )
                try:
                    rho1 = correlate(
                        m1_series,
                        transit_series.values,
                        country_code=country_code,
                        metric="M1",
                        index_name=transit_series.index_name,
                    ).abs_correlation
                except UndefinedCorrelationError:
                    rho1 = None
                try:
                    rho2 = correlate(
                        m2_series,
                        residential_series.values,
                        country_code=country_code,
                        metric="M2",
                        index_name=residential_series.index_name,
                    ).abs_correlation
                except UndefinedCorrelationError:
                    rho2 = None
                cells.append(SweepCell(n=n, r=r, z=z, rho1_abs=rho1, rho2_abs=rho2))
    return cells
