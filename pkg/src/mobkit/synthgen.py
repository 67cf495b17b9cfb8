"""Synthetic trajectory worlds with known ground truth.

Agents live in rectangular regions and either stay home all day or teleport to
a destination drawn at a log-normal distance and back. Observations sample
each agent's true position on an integer-second grid with gaps of at least 20
minutes, first fix before 02:00 and last fix after 22:00, so every agent-day
qualifies under the default estimation rules. Observed coordinates optionally
carry Gaussian noise with a per-fix sigma equal to the reported uncertainty.

Ground truth applies the same daily-distance / stationarity / regional-mean /
population-weighting definitions to the true (noise-free) coordinates with the
uncertainty gate disabled. It is computed here with its own plain loops
(rectangle containment, plain means, own reduction) rather than by calling the
estimation pipeline, so it can serve as an independent oracle; only the
haversine primitive is shared.

Generation is deterministic: agent i draws from an independent substream
seeded by ``SeedSequence((seed, i))`` with a fixed draw order, so worlds are
reproducible byte-for-byte and parallelizable per agent.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .geodesy import EARTH_RADIUS_KM, haversine_km
from .ingest import ObservationRecord

KM_PER_DEG = EARTH_RADIUS_KM * math.pi / 180.0
M_PER_DEG = KM_PER_DEG * 1000.0
MAX_OBSERVATIONS_PER_DAY = 72  # one fix per 20 minutes fills the day

_DAY_SECONDS = 86400
_GAP_SECONDS = 1200
_FIRST_FIX_LATEST_S = 7200       # first fix within two hours of midnight
_LAST_FIX_EARLIEST_S = 79200     # last fix at 22:00 or later


class InfeasibleConfigError(Exception):
    """The synthetic world configuration cannot be generated."""


@dataclass(frozen=True)
class RectRegion:
    """Axis-aligned region rectangle with a resident population."""

    region_id: str
    country_code: str
    lon_min: float
    lat_min: float
    lon_max: float
    lat_max: float
    population: float

    def contains(self, lat: float, lon: float) -> bool:
        """Boundary-inclusive containment."""
        return self.lat_min <= lat <= self.lat_max and self.lon_min <= lon <= self.lon_max


@dataclass(frozen=True)
class SyntheticWorldConfig:
    regions: tuple[RectRegion, ...]
    n_agents: int
    days: int
    start_date: dt.date
    observations_per_day: int = 12
    stay_probability: Union[float, tuple[float, ...]] = 0.3
    travel_lognorm_mu: Union[float, tuple[float, ...]] = math.log(3.0)
    travel_lognorm_sigma: Union[float, tuple[float, ...]] = 0.5
    uncertainty_choices: tuple[float, ...] = (10.0, 25.0, 50.0)
    jitter: bool = True
    stationary_threshold_km: float = 0.2
    seed: int = 0


@dataclass(frozen=True)
class TruthRow:
    """Ground-truth country metrics for one simulated day."""

    country_code: str
    day: int
    date: dt.date
    m1_true: float
    m2_true: float
    n_agents_moving: int


@dataclass(frozen=True)
class SyntheticWorld:
    config: SyntheticWorldConfig
    observations: list[ObservationRecord]
    true_observations: list[ObservationRecord]
    truth: list[TruthRow]


def _per_day(value: Union[float, Sequence[float]], days: int, name: str) -> np.ndarray:
    if isinstance(value, (int, float)):
        return np.full(days, float(value))
    arr = np.asarray(value, dtype=float)
    if arr.shape != (days,):
        raise InfeasibleConfigError(f"{name} must be a scalar or a sequence of length {days}")
    return arr


def _validate(config: SyntheticWorldConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if config.n_agents < 1:
        raise InfeasibleConfigError("need at least one agent")
    if config.days < 1:
        raise InfeasibleConfigError("need at least one day")
    if config.observations_per_day < 2:
        raise InfeasibleConfigError("need at least 2 observations per day")
    if config.observations_per_day > MAX_OBSERVATIONS_PER_DAY:
        raise InfeasibleConfigError(
            f"{config.observations_per_day} observations/day is infeasible under the "
            f"20-minute spacing rule (max {MAX_OBSERVATIONS_PER_DAY})"
        )
    if not config.regions:
        raise InfeasibleConfigError("need at least one region")
    seen = set()
    total_population = 0.0
    for region in config.regions:
        key = (region.country_code, region.region_id)
        if key in seen:
            raise InfeasibleConfigError(f"duplicate region {key}")
        seen.add(key)
        if not (
            -180.0 <= region.lon_min < region.lon_max <= 180.0
            and -90.0 <= region.lat_min < region.lat_max <= 90.0
        ):
            raise InfeasibleConfigError(f"bad bounds for region {region.region_id!r}")
        if not math.isfinite(region.population) or region.population < 0:
            raise InfeasibleConfigError(f"bad population for region {region.region_id!r}")
        total_population += region.population
    if total_population <= 0:
        raise InfeasibleConfigError("total population must be positive")
    if not config.uncertainty_choices or any(
        not math.isfinite(u) or u <= 0 for u in config.uncertainty_choices
    ):
        raise InfeasibleConfigError("uncertainty_choices must be positive and finite")
    if config.stationary_threshold_km <= 0:
        raise InfeasibleConfigError("stationary_threshold_km must be positive")
    if config.seed < 0:
        raise InfeasibleConfigError("seed must be non-negative")
    stay = _per_day(config.stay_probability, config.days, "stay_probability")
    if np.any(stay < 0) or np.any(stay > 1):
        raise InfeasibleConfigError("stay_probability values must lie in [0, 1]")
    mu = _per_day(config.travel_lognorm_mu, config.days, "travel_lognorm_mu")
    sigma = _per_day(config.travel_lognorm_sigma, config.days, "travel_lognorm_sigma")
    if np.any(sigma < 0):
        raise InfeasibleConfigError("travel_lognorm_sigma must be non-negative")
    return stay, mu, sigma


def _allocate_agents(config: SyntheticWorldConfig) -> list[int]:
    """Agents per region by largest-remainder on population, ties in file order."""
    populations = np.array([r.population for r in config.regions], dtype=float)
    quotas = config.n_agents * populations / populations.sum()
    base = np.floor(quotas).astype(int)
    leftover = config.n_agents - int(base.sum())
    remainders = quotas - base
    order = sorted(range(len(config.regions)), key=lambda i: (-remainders[i], i))
    counts = base.copy()
    for i in order[:leftover]:
        counts[i] += 1
    return counts.tolist()


def _observation_seconds(
    rng: np.random.Generator, count: int, min_first_s: int
) -> np.ndarray:
    """Integer seconds within the day: all gaps >= 20 min, early start, late end.

    ``min_first_s`` carries the spacing constraint over midnight: it is how far
    into the day the previous day's last fix forces this day's first fix. Exact
    integer arithmetic keeps every gap at 1200 s or more, so record sanitation
    never thins a synthetic stream.
    """
    min_span = _GAP_SECONDS * (count - 1)
    # min_first_s <= 1199 <= first_latest always holds: the previous day's last
    # fix is below 86400 and min_span never exceeds 85200 (72 fixes).
    first_latest = min(_FIRST_FIX_LATEST_S, _DAY_SECONDS - 1 - min_span)
    first = int(rng.integers(min_first_s, first_latest + 1))
    last = int(rng.integers(max(_LAST_FIX_EARLIEST_S, first + min_span), _DAY_SECONDS))
    seconds = np.empty(count, dtype=np.int64)
    seconds[0] = first
    seconds[-1] = last
    if count > 2:
        inner = np.sort(rng.uniform(0.0, 1.0, count - 2))
        slack = (last - first) - min_span
        for i in range(1, count - 1):
            seconds[i] = first + _GAP_SECONDS * i + int(math.floor(slack * inner[i - 1]))
    return seconds


def _destination(home_lat: float, home_lon: float, distance_km: float, bearing: float) -> tuple[float, float]:
    """Point roughly ``distance_km`` from home at the given bearing (radians)."""
    dlat = distance_km * math.cos(bearing) / KM_PER_DEG
    dlon = distance_km * math.sin(bearing) / (KM_PER_DEG * math.cos(math.radians(home_lat)))
    return home_lat + dlat, home_lon + dlon


def generate(config: SyntheticWorldConfig) -> SyntheticWorld:
    """Generate a synthetic world: noisy observations, true paths, ground truth."""
    stay_probability, travel_mu, travel_sigma = _validate(config)
    counts = _allocate_agents(config)
    uncertainty_choices = np.array(config.uncertainty_choices, dtype=float)

    agent_regions: list[RectRegion] = []
    for region, count in zip(config.regions, counts):
        agent_regions.extend([region] * count)

    observations: list[ObservationRecord] = []
    true_observations: list[ObservationRecord] = []
    # agent -> day index -> list of true (lat, lon) at the day's fix times
    true_paths: dict[str, list[list[tuple[float, float]]]] = {}

    for agent_index, region in enumerate(agent_regions):
        rng = np.random.default_rng(np.random.SeedSequence((config.seed, agent_index)))
        device_id = f"agent{agent_index:05d}"
        home_lat = rng.uniform(region.lat_min, region.lat_max)
        home_lon = rng.uniform(region.lon_min, region.lon_max)
        agent_days: list[list[tuple[float, float]]] = []
        min_first_s = 0
        for day_index in range(config.days):
            day_date = config.start_date + dt.timedelta(days=day_index)
            seconds = _observation_seconds(rng, config.observations_per_day, min_first_s)
            min_first_s = max(0, int(seconds[-1]) - _DAY_SECONDS + _GAP_SECONDS)
            stays_home = rng.uniform() < stay_probability[day_index]
            if stays_home:
                lats = np.full(len(seconds), home_lat)
                lons = np.full(len(seconds), home_lon)
            else:
                distance_km = float(
                    rng.lognormal(travel_mu[day_index], travel_sigma[day_index])
                )
                bearing = rng.uniform(0.0, 2.0 * math.pi)
                dest_lat, dest_lon = _destination(home_lat, home_lon, distance_km, bearing)
                depart_s = rng.uniform(6.0, 11.0) * 3600.0
                return_s = rng.uniform(14.0, 21.0) * 3600.0
                away = (seconds >= depart_s) & (seconds < return_s)
                lats = np.where(away, dest_lat, home_lat)
                lons = np.where(away, dest_lon, home_lon)
            uncertainties = rng.choice(uncertainty_choices, size=len(seconds))
            if config.jitter:
                obs_lats = lats + rng.normal(0.0, uncertainties) / M_PER_DEG
                obs_lons = lons + rng.normal(0.0, uncertainties) / (
                    M_PER_DEG * np.cos(np.radians(lats))
                )
            else:
                obs_lats = lats
                obs_lons = lons
            day_path: list[tuple[float, float]] = []
            midnight = dt.datetime.combine(day_date, dt.time())
            for k in range(len(seconds)):
                timestamp = midnight + dt.timedelta(seconds=int(seconds[k]))
                observations.append(
                    ObservationRecord(
                        device_id, float(obs_lats[k]), float(obs_lons[k]),
                        float(uncertainties[k]), timestamp,
                    )
                )
                true_observations.append(
                    ObservationRecord(
                        device_id, float(lats[k]), float(lons[k]), 0.0, timestamp
                    )
                )
                day_path.append((float(lats[k]), float(lons[k])))
            agent_days.append(day_path)
        true_paths[device_id] = agent_days

    truth = _ground_truth(config, true_paths)
    return SyntheticWorld(config, observations, true_observations, truth)


def _ground_truth(
    config: SyntheticWorldConfig,
    true_paths: dict[str, list[list[tuple[float, float]]]],
) -> list[TruthRow]:
    """Country metrics from true coordinates with the uncertainty gate off."""
    countries = sorted({r.country_code for r in config.regions})
    rows: list[TruthRow] = []
    for day_index in range(config.days):
        day_date = config.start_date + dt.timedelta(days=day_index)
        # (country, region_id, device_id, travelled, moving_flag)
        assigned: list[tuple[str, str, str, float, int]] = []
        for device_id in sorted(true_paths):
            path = true_paths[device_id][day_index]
            travelled = 0.0
            for (lat_a, lon_a), (lat_b, lon_b) in zip(path, path[1:]):
                travelled += haversine_km(lat_a, lon_a, lat_b, lon_b)
            if day_index + 1 < config.days:
                next_lat, next_lon = true_paths[device_id][day_index + 1][0]
                travelled += haversine_km(path[-1][0], path[-1][1], next_lat, next_lon)
            lat_sum = 0.0
            lon_sum = 0.0
            for lat, lon in path:
                lat_sum += lat
                lon_sum += lon
            mean_lat = lat_sum / len(path)
            mean_lon = lon_sum / len(path)
            region = None
            for candidate in config.regions:
                if candidate.contains(mean_lat, mean_lon):
                    region = candidate
                    break
            if region is None:
                continue
            moving = 0 if travelled < config.stationary_threshold_km else 1
            assigned.append(
                (region.country_code, region.region_id, device_id, travelled, moving)
            )

        for country in countries:
            country_rows = sorted(
                (entry for entry in assigned if entry[0] == country),
                key=lambda entry: (entry[1], entry[2]),
            )
            if not country_rows:
                continue
            region_ids: list[str] = []
            region_values: dict[str, list[tuple[float, int]]] = {}
            for _, region_id, _, travelled, moving in country_rows:
                if region_id not in region_values:
                    region_values[region_id] = []
                    region_ids.append(region_id)
                region_values[region_id].append((travelled, moving))
            populations = {
                r.region_id: r.population for r in config.regions if r.country_code == country
            }
            total_population = 0.0
            for region_id in region_ids:
                total_population += populations[region_id]
            m1 = 0.0
            m2 = 0.0
            moving_count = 0
            for region_id in region_ids:
                values = region_values[region_id]
                travel_sum = 0.0
                stationary_sum = 0.0
                for travelled, moving in values:
                    travel_sum += travelled
                    stationary_sum += 1 - moving
                    moving_count += moving
                weight = populations[region_id] / total_population
                m1 += weight * (travel_sum / len(values))
                m2 += weight * (stationary_sum / len(values))
            rows.append(
                TruthRow(
                    country_code=country,
                    day=day_index + 1,
                    date=day_date,
                    m1_true=m1,
                    m2_true=m2,
                    n_agents_moving=moving_count,
                )
            )
    return rows


def subsample_penetration(
    observations: Sequence[ObservationRecord], fraction: float, seed: int
) -> list[ObservationRecord]:
    """Keep all records of a random exact-count subset of devices.

    ``round(fraction * device_count)`` devices are drawn without replacement;
    a fraction of 1 keeps everything. An empty subset is an error.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    devices = sorted({record.device_id for record in observations})
    if not devices:
        raise ValueError("no devices to subsample")
    count = int(round(fraction * len(devices)))
    if count <= 0:
        raise ValueError(
            f"fraction {fraction} of {len(devices)} devices leaves an empty subset"
        )
    if count >= len(devices):
        return list(observations)
    rng = np.random.default_rng(np.random.SeedSequence((seed, len(devices))))
    kept = set(rng.choice(np.array(devices, dtype=object), size=count, replace=False))
    return [record for record in observations if record.device_id in kept]


# ---------------------------------------------------------------------------
# Writers
# ---------------------------------------------------------------------------


def write_observations_csv(observations: Iterable[ObservationRecord], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["device_id", "lat", "lon", "uncertainty_m", "timestamp"])
        for record in observations:
            writer.writerow(
                [
                    record.device_id,
                    repr(record.lat),
                    repr(record.lon),
                    repr(record.uncertainty_m),
                    record.timestamp.isoformat(),
                ]
            )


def regions_geojson(regions: Sequence[RectRegion]) -> dict:
    features = []
    for region in regions:
        ring = [
            [region.lon_min, region.lat_min],
            [region.lon_max, region.lat_min],
            [region.lon_max, region.lat_max],
            [region.lon_min, region.lat_max],
            [region.lon_min, region.lat_min],
        ]
        features.append(
            {
                "type": "Feature",
                "properties": {
                    "region_id": region.region_id,
                    "country_code": region.country_code,
                    "population": region.population,
                },
                "geometry": {"type": "Polygon", "coordinates": [ring]},
            }
        )
    return {"type": "FeatureCollection", "features": features}


def write_regions_geojson(regions: Sequence[RectRegion], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        json.dump(regions_geojson(regions), handle, indent=2, sort_keys=True)
        handle.write("\n")


def write_truth_csv(truth: Iterable[TruthRow], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["country", "day", "M1_true", "M2_true", "N_agents_moving"])
        for row in truth:
            writer.writerow(
                [row.country_code, row.day, repr(row.m1_true), repr(row.m2_true), row.n_agents_moving]
            )


def write_world(world: SyntheticWorld, output_dir: Union[str, Path]) -> dict[str, Path]:
    """Write observations.csv, regions.geojson and truth.csv; returns the paths."""
    output = Path(output_dir)
    output.mkdir(parents=True, exist_ok=True)
    paths = {
        "observations": output / "observations.csv",
        "regions": output / "regions.geojson",
        "truth": output / "truth.csv",
    }
    write_observations_csv(world.observations, paths["observations"])
    write_regions_geojson(list(world.config.regions), paths["regions"])
    write_truth_csv(world.truth, paths["truth"])
    return paths


# ---------------------------------------------------------------------------
# Synthetic reference indices (community-mobility-report layout)
# ---------------------------------------------------------------------------

REFERENCE_CSV_COLUMNS = [
    "country_region_code",
    "country_region",
    "sub_region_1",
    "sub_region_2",
    "metro_area",
    "iso_3166_2_code",
    "census_fips_code",
    "place_id",
    "date",
    "retail_and_recreation_percent_change_from_baseline",
    "grocery_and_pharmacy_percent_change_from_baseline",
    "parks_percent_change_from_baseline",
    "transit_stations_percent_change_from_baseline",
    "workplaces_percent_change_from_baseline",
    "residential_percent_change_from_baseline",
]


def make_reference_rows(
    truth: Sequence[TruthRow], seed: int = 0, noise_sd: float = 0.05
) -> list[dict[str, str]]:
    """Index rows derived from ground truth, for desk-scale correlation runs.

    transit tracks the true M1 series, residential tracks true M2, workplaces
    anti-tracks true M2; each is z-scored, scaled to percent-like values and
    dusted with Gaussian noise (sd = noise_sd * 100 units).
    """
    rng = np.random.default_rng(np.random.SeedSequence((seed, 987654321)))
    rows: list[dict[str, str]] = []
    countries = sorted({row.country_code for row in truth})
    for country in countries:
        country_rows = sorted((r for r in truth if r.country_code == country), key=lambda r: r.day)
        m1 = np.array([r.m1_true for r in country_rows])
        m2 = np.array([r.m2_true for r in country_rows])

        def zscore(v: np.ndarray) -> np.ndarray:
            sd = v.std()
            return (v - v.mean()) / sd if sd > 0 else np.zeros_like(v)

        transit = 100.0 * zscore(m1) + rng.normal(0.0, noise_sd * 100.0, len(m1))
        residential = 100.0 * zscore(m2) + rng.normal(0.0, noise_sd * 100.0, len(m2))
        workplaces = -100.0 * zscore(m2) + rng.normal(0.0, noise_sd * 100.0, len(m2))
        for i, truth_row in enumerate(country_rows):
            row = dict.fromkeys(REFERENCE_CSV_COLUMNS, "")
            row["country_region_code"] = country
            row["country_region"] = country
            row["date"] = truth_row.date.isoformat()
            row["transit_stations_percent_change_from_baseline"] = f"{transit[i]:.3f}"
            row["residential_percent_change_from_baseline"] = f"{residential[i]:.3f}"
            row["workplaces_percent_change_from_baseline"] = f"{workplaces[i]:.3f}"
            rows.append(row)
    return rows


def write_reference_csv(rows: Iterable[dict[str, str]], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=REFERENCE_CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
