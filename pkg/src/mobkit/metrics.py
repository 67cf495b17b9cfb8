"""Daily mobility metrics: gated travel distances and stationary shares.

Per device and calendar day, the travelled distance is the sum of great-circle
segment lengths between consecutive observations, where a segment only counts
if it is at least as long as the (multiplier-scaled) sum of the two endpoint
uncertainties — shorter segments cannot be told apart from positioning noise
and contribute zero. The segment from a day's last observation to the next
day's first observation belongs to the earlier day. A device-day enters the
estimate only if it has enough observations spread over a long enough span.

Device-days are assigned to a region (and through it a country) by their daily
mean coordinate. Regional means are combined into country metrics with
population weights renormalized over the regions actually observed that day.

All reductions run in a fixed order (region_id, then device_id) so results are
reproducible bit-for-bit regardless of input order or thread count.
"""

from __future__ import annotations

import datetime as dt
import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .geodesy import haversine_km, mean_coordinate
from .ingest import ObservationRecord, RegionTable, assign_region


class EstimationError(Exception):
    """Estimation cannot proceed (e.g. observed regions with zero population)."""


@dataclass(frozen=True)
class EstimationParams:
    """Knobs of the daily estimator.

    min_observations: minimum fixes for a device-day to qualify (n).
    uncertainty_multiplier: scale applied to both endpoint uncertainties in
        the segment gate (r).
    stationary_threshold_km: a device-day travelling strictly less than this
        is stationary (z).
    min_span_hours: minimum first-to-last observation span for qualification.
    """

    min_observations: int = 12
    uncertainty_multiplier: float = 1.0
    stationary_threshold_km: float = 0.2
    min_span_hours: float = 12.0

    def __post_init__(self) -> None:
        if self.min_observations < 2:
            raise ValueError("min_observations must be >= 2")
        if not self.uncertainty_multiplier > 0:
            raise ValueError("uncertainty_multiplier must be > 0")
        if not self.stationary_threshold_km > 0:
            raise ValueError("stationary_threshold_km must be > 0")
        if self.min_span_hours < 0:
            raise ValueError("min_span_hours must be >= 0")


@dataclass(frozen=True)
class DailyTrajectorySummary:
    """One qualified device-day: where it was, how far it moved."""

    device_id: str
    date: dt.date
    country_code: str | None
    region_id: str | None
    travelled_km: float
    stationary: int
    mean_lat: float
    mean_lon: float
    observation_count: int


@dataclass(frozen=True)
class RegionalDailyAggregate:
    """Per-region daily means over its qualified trajectories."""

    region_id: str
    country_code: str
    date: dt.date
    mean_travelled_km: float
    stationary_fraction: float
    sample_size: int


@dataclass(frozen=True)
class CountryDailyMetric:
    """Country-level daily metrics; None marks a day with no usable data."""

    country_code: str
    day: int
    date: dt.date
    m1_km: float | None
    m2: float | None
    n: int
    m1_lo: float | None = None
    m1_hi: float | None = None
    m2_lo: float | None = None
    m2_hi: float | None = None


def qualify_day(observations: Sequence[ObservationRecord], params: EstimationParams) -> bool:
    """A device-day qualifies with >= n observations spanning >= the minimum hours."""
    if len(observations) < params.min_observations:
        return False
    span_seconds = (observations[-1].timestamp - observations[0].timestamp).total_seconds()
    return span_seconds >= params.min_span_hours * 3600.0


def gate_distance_km(distance_km: float, u_a_m: float, u_b_m: float, multiplier: float) -> float:
    """Zero out a segment shorter than the scaled sum of endpoint uncertainties.

    The boundary case (segment exactly as long as the threshold) is kept.
    """
    threshold_km = (multiplier * u_a_m + multiplier * u_b_m) / 1000.0
    return distance_km if distance_km >= threshold_km else 0.0


def gated_segment_km(a: ObservationRecord, b: ObservationRecord, multiplier: float) -> float:
    """Gated great-circle distance between two observations."""
    distance = haversine_km(a.lat, a.lon, b.lat, b.lon)
    return gate_distance_km(distance, a.uncertainty_m, b.uncertainty_m, multiplier)


def daily_distance(
    day_observations: Sequence[ObservationRecord],
    next_day_first: ObservationRecord | None,
    params: EstimationParams,
) -> float:
    """Sum of gated segments whose first endpoint falls on the day.

    ``next_day_first`` is the device's first observation of the following
    calendar day, if any; that closing segment is attributed to this day.
    """
    total = 0.0
    for a, b in zip(day_observations, day_observations[1:]):
        total += gated_segment_km(a, b, params.uncertainty_multiplier)
    if next_day_first is not None and day_observations:
        total += gated_segment_km(day_observations[-1], next_day_first, params.uncertainty_multiplier)
    return total


def stationarity_flag(travelled_km: float, threshold_km: float) -> int:
    """1 if the day's travelled distance is strictly below the threshold."""
    return 1 if travelled_km < threshold_km else 0


def group_by_device_day(
    records: Iterable[ObservationRecord],
) -> dict[str, dict[dt.date, list[ObservationRecord]]]:
    """device_id -> calendar date -> time-ordered observations."""
    per_device: dict[str, list[ObservationRecord]] = {}
    for record in records:
        per_device.setdefault(record.device_id, []).append(record)
    out: dict[str, dict[dt.date, list[ObservationRecord]]] = {}
    for device_id in sorted(per_device):
        observations = sorted(per_device[device_id], key=lambda r: r.timestamp)
        by_day: dict[dt.date, list[ObservationRecord]] = {}
        for record in observations:
            by_day.setdefault(record.timestamp.date(), []).append(record)
        out[device_id] = by_day
    return out


def summarize(
    records: Iterable[ObservationRecord],
    table: RegionTable,
    params: EstimationParams,
) -> list[DailyTrajectorySummary]:
    """Turn sanitized records into per-device-day summaries.

    Unqualified device-days are dropped. Each summary is assigned to the first
    region (file order) covering its daily mean coordinate; summaries outside
    every region keep region/country None and are excluded from aggregation.
    """
    summaries: list[DailyTrajectorySummary] = []
    for device_id, by_day in group_by_device_day(records).items():
        for day in sorted(by_day):
            day_observations = by_day[day]
            if not qualify_day(day_observations, params):
                continue
            following = by_day.get(day + dt.timedelta(days=1))
            next_day_first = following[0] if following else None
            travelled = daily_distance(day_observations, next_day_first, params)
            flag = stationarity_flag(travelled, params.stationary_threshold_km)
            mean_lat, mean_lon = mean_coordinate(
                [o.lat for o in day_observations], [o.lon for o in day_observations]
            )
            region = assign_region((mean_lat, mean_lon), table)
            summaries.append(
                DailyTrajectorySummary(
                    device_id=device_id,
                    date=day,
                    country_code=region.country_code if region else None,
                    region_id=region.region_id if region else None,
                    travelled_km=travelled,
                    stationary=flag,
                    mean_lat=mean_lat,
                    mean_lon=mean_lon,
                    observation_count=len(day_observations),
                )
            )
    return summaries


def group_by_country_day(
    summaries: Iterable[DailyTrajectorySummary],
) -> dict[str, dict[dt.date, list[DailyTrajectorySummary]]]:
    """country -> date -> summaries sorted by (region_id, device_id).

    The sort fixes the reduction order for all downstream means.
    Summaries outside every region are dropped here.
    """
    out: dict[str, dict[dt.date, list[DailyTrajectorySummary]]] = {}
    ordered = sorted(
        (s for s in summaries if s.region_id is not None),
        key=lambda s: (s.country_code, s.date.toordinal(), s.region_id, s.device_id),
    )
    for summary in ordered:
        out.setdefault(summary.country_code, {}).setdefault(summary.date, []).append(summary)
    return out


def regional_aggregate(day_summaries: Sequence[DailyTrajectorySummary]) -> list[RegionalDailyAggregate]:
    """Per-region means for one country-day; input must be region-sorted."""
    aggregates: list[RegionalDailyAggregate] = []
    for region_id, group_iter in itertools.groupby(day_summaries, key=lambda s: s.region_id):
        group = list(group_iter)
        n = len(group)
        travelled_sum = 0.0
        for summary in group:
            travelled_sum += summary.travelled_km
        stationary_sum = 0.0
        for summary in group:
            stationary_sum += summary.stationary
        aggregates.append(
            RegionalDailyAggregate(
                region_id=region_id,
                country_code=group[0].country_code,
                date=group[0].date,
                mean_travelled_km=travelled_sum / n,
                stationary_fraction=stationary_sum / n,
                sample_size=n,
            )
        )
    return aggregates


def weighted_country_values(
    aggregates: Sequence[RegionalDailyAggregate],
    table: RegionTable,
    country_code: str,
) -> tuple[float, float, int] | None:
    """Population-weighted (m1, m2, n) over observed regions, or None if empty.

    Weights are the regions' population shares renormalized over the regions
    present in ``aggregates``, summed in region_id order.
    """
    if not aggregates:
        return None
    ordered = sorted(aggregates, key=lambda a: a.region_id)
    total_population = 0.0
    for aggregate in ordered:
        total_population += table.population(country_code, aggregate.region_id)
    if total_population <= 0.0:
        raise EstimationError(
            f"observed regions of {country_code!r} have zero total population"
        )
    m1 = 0.0
    m2 = 0.0
    n = 0
    for aggregate in ordered:
        weight = table.population(country_code, aggregate.region_id) / total_population
        m1 += weight * aggregate.mean_travelled_km
        m2 += weight * aggregate.stationary_fraction
        n += aggregate.sample_size
    return m1, m2, n


def country_metric(
    aggregates: Sequence[RegionalDailyAggregate],
    table: RegionTable,
    country_code: str,
    day: int,
    date: dt.date,
) -> CountryDailyMetric:
    """Country-day metric from its regional aggregates; missing when empty."""
    values = weighted_country_values(aggregates, table, country_code)
    if values is None:
        return CountryDailyMetric(country_code, day, date, None, None, 0)
    m1, m2, n = values
    return CountryDailyMetric(country_code, day, date, m1, m2, n)


def period_dates(start: dt.date, end: dt.date) -> list[dt.date]:
    """Every calendar date from start to end inclusive."""
    if end < start:
        raise ValueError("period end precedes start")
    return [start + dt.timedelta(days=i) for i in range((end - start).days + 1)]


def daily_series(
    summaries: Iterable[DailyTrajectorySummary],
    table: RegionTable,
    country_code: str,
    dates: Sequence[dt.date],
) -> list[CountryDailyMetric]:
    """Country metric for every date of the period (missing days included)."""
    grouped = group_by_country_day(summaries).get(country_code, {})
    series = []
    for index, day_date in enumerate(dates, start=1):
        aggregates = regional_aggregate(grouped.get(day_date, []))
        series.append(country_metric(aggregates, table, country_code, index, day_date))
    return series


def daily_aggregates_by_date(
    summaries: Iterable[DailyTrajectorySummary],
    country_code: str,
) -> dict[dt.date, list[RegionalDailyAggregate]]:
    """date -> regional aggregates for one country (for smoothing windows)."""
    grouped = group_by_country_day(summaries).get(country_code, {})
    return {day: regional_aggregate(day_summaries) for day, day_summaries in grouped.items()}


def value_panel(
    summaries: Iterable[DailyTrajectorySummary],
) -> dict[str, dict[dt.date, dict[str, tuple[np.ndarray, np.ndarray]]]]:
    """country -> date -> region_id -> (travelled_km array, stationary array).

    Arrays follow the fixed (region_id, device_id) order; they are the
    per-trajectory values the bootstrap resamples within each stratum.
    """
    panel: dict[str, dict[dt.date, dict[str, tuple[np.ndarray, np.ndarray]]]] = {}
    for country_code, by_date in group_by_country_day(summaries).items():
        country_panel: dict[dt.date, dict[str, tuple[np.ndarray, np.ndarray]]] = {}
        for day, day_summaries in by_date.items():
            regions: dict[str, tuple[np.ndarray, np.ndarray]] = {}
            for region_id, group_iter in itertools.groupby(day_summaries, key=lambda s: s.region_id):
                group = list(group_iter)
                travelled = np.array([s.travelled_km for s in group], dtype=float)
                stationary = np.array([float(s.stationary) for s in group], dtype=float)
                regions[region_id] = (travelled, stationary)
            country_panel[day] = regions
        panel[country_code] = country_panel
    return panel
