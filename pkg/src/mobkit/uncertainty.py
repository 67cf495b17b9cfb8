"""Stratified nonparametric bootstrap intervals for the country metrics.

Each replicate resamples trajectories with replacement within every
(day, region) stratum of the window at the observed stratum size, recomputes
the pooled regional values and the population-weighted country metric, and the
interval is the percentile range of the replicates. Smoothed series use the
same machinery with the window spanning q days.

Reproducibility: replicate b for country c and day d draws from an independent
substream seeded by ``SeedSequence((seed, crc32(c), d.toordinal(), b))``, so
results are identical no matter how replicates or days are distributed over
threads.
"""

from __future__ import annotations

import datetime as dt
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Mapping, Sequence, TypeVar

import numpy as np

from .ingest import RegionTable
from .metrics import CountryDailyMetric
from .smoothing import SmoothedDailyMetric

T = TypeVar("T")
U = TypeVar("U")

# country -> date -> region_id -> (travelled_km values, stationary values)
CountryPanel = Mapping[dt.date, Mapping[str, tuple[np.ndarray, np.ndarray]]]


@dataclass(frozen=True)
class BootstrapConfig:
    """iterations: replicate count; alpha: interval tail mass in percent."""

    iterations: int = 1000
    alpha: float = 5.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0.0 < self.alpha < 100.0:
            raise ValueError("alpha must be a percentage strictly between 0 and 100")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")


@dataclass(frozen=True)
class MetricInterval:
    m1_lo: float
    m1_hi: float
    m2_lo: float
    m2_hi: float


def _substream(seed: int, country_code: str, day: dt.date, iteration: int) -> np.random.Generator:
    """Independent generator for one (country, day, iteration) replicate."""
    entropy = (seed, zlib.crc32(country_code.encode("utf-8")), day.toordinal(), iteration)
    return np.random.default_rng(np.random.SeedSequence(entropy))


def bootstrap_replicates(
    window_panel: CountryPanel,
    populations: Mapping[str, float],
    config: BootstrapConfig,
    country_code: str,
    day: dt.date,
) -> np.ndarray:
    """(iterations, 2) array of resampled (m1, m2) country values.

    ``window_panel`` holds the per-(day, region) trajectory values of the
    window ending at ``day``; every stratum is resampled at its own size.
    """
    strata: list[tuple[dt.date, str, np.ndarray, np.ndarray]] = []
    for window_day in sorted(window_panel):
        for region_id in sorted(window_panel[window_day]):
            travelled, stationary = window_panel[window_day][region_id]
            if len(travelled) == 0:
                raise ValueError(f"empty stratum {region_id!r} on {window_day}")
            strata.append((window_day, region_id, travelled, stationary))
    if not strata:
        raise ValueError("no strata to resample")

    region_ids = sorted({region_id for _, region_id, _, _ in strata})
    total_population = sum(populations[region_id] for region_id in region_ids)
    if total_population <= 0.0:
        raise ValueError("observed regions have zero total population")
    weights = {region_id: populations[region_id] / total_population for region_id in region_ids}
    region_totals = {region_id: 0 for region_id in region_ids}
    for _, region_id, travelled, _ in strata:
        region_totals[region_id] += len(travelled)

    out = np.empty((config.iterations, 2), dtype=float)
    for b in range(config.iterations):
        rng = _substream(config.seed, country_code, day, b)
        travel_sums = dict.fromkeys(region_ids, 0.0)
        stationary_sums = dict.fromkeys(region_ids, 0.0)
        for _, region_id, travelled, stationary in strata:
            indices = rng.integers(0, len(travelled), size=len(travelled))
            travel_sums[region_id] += float(travelled[indices].sum())
            stationary_sums[region_id] += float(stationary[indices].sum())
        m1 = 0.0
        m2 = 0.0
        for region_id in region_ids:
            weight = weights[region_id]
            m1 += weight * (travel_sums[region_id] / region_totals[region_id])
            m2 += weight * (stationary_sums[region_id] / region_totals[region_id])
        out[b, 0] = m1
        out[b, 1] = m2
    return out


def bootstrap_ci(
    window_panel: CountryPanel,
    populations: Mapping[str, float],
    config: BootstrapConfig,
    country_code: str,
    day: dt.date,
) -> MetricInterval:
    """Percentile interval of the replicates (alpha/2 .. 100-alpha/2)."""
    replicates = bootstrap_replicates(window_panel, populations, config, country_code, day)
    lo = config.alpha / 2.0
    hi = 100.0 - config.alpha / 2.0
    m1_lo, m1_hi = np.percentile(replicates[:, 0], [lo, hi])
    m2_lo, m2_hi = np.percentile(replicates[:, 1], [lo, hi])
    return MetricInterval(float(m1_lo), float(m1_hi), float(m2_lo), float(m2_hi))


def parallel_map(fn: Callable[[T], U], items: Sequence[T], threads: int) -> list[U]:
    """Order-preserving map, optionally on a thread pool (results identical)."""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _window_panel(
    panel: CountryPanel, dates: Sequence[dt.date], index: int, q: int
) -> dict[dt.date, Mapping[str, tuple[np.ndarray, np.ndarray]]]:
    window = dates[index - q + 1 : index + 1]
    return {day: panel[day] for day in window if day in panel and panel[day]}


def attach_intervals(
    series: Sequence[CountryDailyMetric],
    panel: CountryPanel,
    table: RegionTable,
    config: BootstrapConfig,
    country_code: str,
    dates: Sequence[dt.date],
    threads: int = 1,
) -> list[CountryDailyMetric]:
    """Daily series with percentile intervals filled in (missing days skipped)."""
    populations = {r.region_id: r.population for r in table.regions_for(country_code)}

    def work(item: tuple[int, CountryDailyMetric]) -> CountryDailyMetric:
        index, metric = item
        if metric.m1_km is None:
            return metric
        window_panel = _window_panel(panel, dates, index, 1)
        interval = bootstrap_ci(window_panel, populations, config, country_code, metric.date)
        return replace(
            metric,
            m1_lo=interval.m1_lo,
            m1_hi=interval.m1_hi,
            m2_lo=interval.m2_lo,
            m2_hi=interval.m2_hi,
        )

    return parallel_map(work, list(enumerate(series)), threads)


def attach_smoothed_intervals(
    series: Sequence[SmoothedDailyMetric],
    panel: CountryPanel,
    table: RegionTable,
    config: BootstrapConfig,
    country_code: str,
    dates: Sequence[dt.date],
    threads: int = 1,
) -> list[SmoothedDailyMetric]:
    """Smoothed series with intervals from q-day windowed resampling."""
    populations = {r.region_id: r.population for r in table.regions_for(country_code)}

    def work(metric: SmoothedDailyMetric) -> SmoothedDailyMetric:
        if metric.m1_km is None:
            return metric
        index = metric.day - 1
        window_panel = _window_panel(panel, dates, index, metric.q)
        interval = bootstrap_ci(window_panel, populations, config, country_code, metric.date)
        return replace(
            metric,
            m1_lo=interval.m1_lo,
            m1_hi=interval.m1_hi,
            m2_lo=interval.m2_lo,
            m2_hi=interval.m2_hi,
        )

    return parallel_map(work, list(series), threads)
