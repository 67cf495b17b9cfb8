"""Trailing-window smoothing of the daily regional series.

The smoothed regional value for day d and window q is the pooled mean of all
trajectory values observed in that region over days d-q+1..d: equivalently the
sample-size-weighted mean of the daily regional means. Country values then
apply the usual population weighting over the regions observed anywhere in the
window. The first q-1 days of a period emit nothing; a window with no data at
all yields a missing value.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from typing import Mapping, Sequence

from .ingest import RegionTable
from .metrics import RegionalDailyAggregate, weighted_country_values


@dataclass(frozen=True)
class SmoothedDailyMetric:
    """Country-level smoothed metrics for one day and one window length."""

    country_code: str
    q: int
    day: int
    date: dt.date
    m1_km: float | None
    m2: float | None
    n: int
    m1_lo: float | None = None
    m1_hi: float | None = None
    m2_lo: float | None = None
    m2_hi: float | None = None


def pooled_regional_aggregates(
    aggregates_by_date: Mapping[dt.date, Sequence[RegionalDailyAggregate]],
    window: Sequence[dt.date],
) -> list[RegionalDailyAggregate]:
    """Pool each region's daily aggregates over the window.

    Pooling weights each day by its sample size, which equals a plain mean
    over all the window's trajectory values. A region contributing on exactly
    one day passes that day's mean through unchanged (so q=1 reproduces the
    daily series exactly).
    """
    per_region: dict[str, list[RegionalDailyAggregate]] = {}
    for day in window:
        for aggregate in aggregates_by_date.get(day, []):
            per_region.setdefault(aggregate.region_id, []).append(aggregate)

    pooled: list[RegionalDailyAggregate] = []
    for region_id in sorted(per_region):
        parts = per_region[region_id]
        if len(parts) == 1:
            single = parts[0]
            pooled.append(
                RegionalDailyAggregate(
                    region_id=region_id,
                    country_code=single.country_code,
                    date=window[-1],
                    mean_travelled_km=single.mean_travelled_km,
                    stationary_fraction=single.stationary_fraction,
                    sample_size=single.sample_size,
                )
            )
            continue
        total_n = 0
        for part in parts:
            total_n += part.sample_size
        travelled_sum = 0.0
        for part in parts:
            travelled_sum += part.sample_size * part.mean_travelled_km
        stationary_sum = 0.0
        for part in parts:
            stationary_sum += part.sample_size * part.stationary_fraction
        pooled.append(
            RegionalDailyAggregate(
                region_id=region_id,
                country_code=parts[0].country_code,
                date=window[-1],
                mean_travelled_km=travelled_sum / total_n,
                stationary_fraction=stationary_sum / total_n,
                sample_size=total_n,
            )
        )
    return pooled


def smoothed_series(
    aggregates_by_date: Mapping[dt.date, Sequence[RegionalDailyAggregate]],
    table: RegionTable,
    country_code: str,
    dates: Sequence[dt.date],
    q: int,
) -> list[SmoothedDailyMetric]:
    """Smoothed country series over the period for one window length."""
    if q < 1:
        raise ValueError("window length q must be >= 1")
    series: list[SmoothedDailyMetric] = []
    for index in range(q - 1, len(dates)):
        window = dates[index - q + 1 : index + 1]
        pooled = pooled_regional_aggregates(aggregates_by_date, window)
        values = weighted_country_values(pooled, table, country_code)
        if values is None:
            series.append(
                SmoothedDailyMetric(country_code, q, index + 1, dates[index], None, None, 0)
            )
        else:
            m1, m2, n = values
            series.append(
                SmoothedDailyMetric(country_code, q, index + 1, dates[index], m1, m2, n)
            )
    return series
