"""Shared builders for tests: region tables, observations, random micro-worlds."""

from __future__ import annotations

import datetime as dt
import io
import json

import numpy as np
import pytest

from mobkit.ingest import ObservationRecord, RegionTable
from mobkit.metrics import EstimationParams

START = dt.date(2020, 3, 11)


def estimation_params(params: dict) -> EstimationParams:
    """EstimationParams from a micro-instance's short-keyed parameter dict."""
    return EstimationParams(
        min_observations=params["n"],
        uncertainty_multiplier=params["r"],
        stationary_threshold_km=params["z"],
        min_span_hours=params["span_hours"],
    )


def rect_region(country, region_id, lon_min, lat_min, lon_max, lat_max, population):
    return {
        "country": country,
        "region_id": region_id,
        "lon_min": lon_min,
        "lat_min": lat_min,
        "lon_max": lon_max,
        "lat_max": lat_max,
        "population": population,
    }


def regions_geojson_text(regions) -> str:
    features = []
    for r in regions:
        ring = [
            [r["lon_min"], r["lat_min"]],
            [r["lon_max"], r["lat_min"]],
            [r["lon_max"], r["lat_max"]],
            [r["lon_min"], r["lat_max"]],
            [r["lon_min"], r["lat_min"]],
        ]
        features.append(
            {
                "type": "Feature",
                "properties": {
                    "region_id": r["region_id"],
                    "country_code": r["country"],
                    "population": r["population"],
                },
                "geometry": {"type": "Polygon", "coordinates": [ring]},
            }
        )
    return json.dumps({"type": "FeatureCollection", "features": features})


def make_table(regions) -> RegionTable:
    return RegionTable.from_geojson(io.StringIO(regions_geojson_text(regions)))


def obs(device, lat, lon, uncertainty, iso_timestamp) -> ObservationRecord:
    return ObservationRecord(device, lat, lon, uncertainty, dt.datetime.fromisoformat(iso_timestamp))


def to_records(rows) -> list[ObservationRecord]:
    """Plain naive-pipeline tuples -> package records."""
    return [ObservationRecord(*row) for row in rows]


# ---------------------------------------------------------------------------
# Randomized micro-instances (shared by the oracle-equivalence and
# monotonicity checks)
# ---------------------------------------------------------------------------

MICRO_REGIONS = [
    rect_region("AAA", "west", -2.0, -2.0, 0.5, 2.0, 120.0),
    rect_region("AAA", "east", 0.0, -2.0, 2.0, 2.0, 80.0),  # overlaps 'west'
    rect_region("BBB", "north", 4.0, -1.0, 6.0, 1.0, 300.0),
]

_MICRO_ANCHORS = [(-1.0, -1.0), (1.0, 1.0), (0.25, 0.0), (0.0, 5.0), (3.0, 3.0)]
_MICRO_UNCERTAINTIES = [1.0, 25.0, 400.0, 30_000.0, 90_000.0]


def random_micro_instance(rng: np.random.Generator):
    """A tiny random world: <= 5 devices, <= 3 days, <= 100 observations.

    Returns (rows, regions, params, dates) where rows are naive-pipeline
    tuples. Uncertainties span 1 m to 90 km so segment gating triggers at
    every scale, anchors sit inside, across and outside the regions, and
    some device-days have too few fixes or too short a span to qualify.
    """
    n_devices = int(rng.integers(1, 6))
    n_days = int(rng.integers(1, 4))
    dates = [START + dt.timedelta(days=i) for i in range(n_days)]
    params = {
        "n": int(rng.integers(2, 5)),
        "r": float(rng.choice([0.5, 1.0, 2.0])),
        "z": float(rng.choice([0.05, 0.2, 0.5])),
        "span_hours": float(rng.choice([0.5, 1.0, 3.0])),
    }
    rows = []
    for d in range(n_devices):
        anchor_lat, anchor_lon = _MICRO_ANCHORS[int(rng.integers(0, len(_MICRO_ANCHORS)))]
        spread = float(rng.uniform(0.0005, 0.8))
        for date in dates:
            count = int(rng.integers(0, 7))
            if count == 0:
                continue
            seconds = np.sort(rng.choice(np.arange(0, 86400, 1200), size=count, replace=False))
            for s in seconds:
                rows.append(
                    (
                        f"dev{d}",
                        float(anchor_lat + rng.normal(0.0, spread)),
                        float(anchor_lon + rng.normal(0.0, spread)),
                        float(rng.choice(_MICRO_UNCERTAINTIES)),
                        dt.datetime.combine(date, dt.time()) + dt.timedelta(seconds=int(s)),
                    )
                )
    return rows, MICRO_REGIONS, params, dates


@pytest.fixture
def unit_square_table() -> RegionTable:
    return make_table([rect_region("AAA", "unit", 0.0, 0.0, 1.0, 1.0, 1000.0)])
