"""Great-circle distances and coordinate averaging on a spherical Earth.

All distances use the haversine formula on a sphere of radius 6371.0088 km
(IUGG mean radius). Kept dependency-free on purpose: these few lines are the
innermost loop of the whole pipeline and double as the reference definition
the rest of the code builds on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

EARTH_RADIUS_KM = 6371.0088


@dataclass(frozen=True)
class GeoPoint:
    """A latitude/longitude pair in decimal degrees."""

    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat!r}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon!r}")


def haversine_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in km between two lat/lon points in degrees."""
    phi1 = math.radians(lat1)
    phi2 = math.radians(lat2)
    dphi = math.radians(lat2 - lat1)
    dlmb = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(a)))


def geodesic_distance_km(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in km between two points."""
    return haversine_km(a.lat, a.lon, b.lat, b.lon)


def unwrap_longitude(lon: float, reference: float) -> float:
    """Shift ``lon`` by a multiple of 360 deg so it lies within 180 deg of ``reference``.

    Longitudes already within 180 deg of the reference are returned unchanged
    (exactly, with no float round-trip).
    """
    if abs(lon - reference) <= 180.0:
        return lon
    return reference + math.remainder(lon - reference, 360.0)


def mean_coordinate(lats: Sequence[float], lons: Sequence[float]) -> tuple[float, float]:
    """Arithmetic mean of coordinates, averaging longitudes on an unwrapped axis.

    Longitudes are unwrapped relative to the first point so clusters that
    straddle the antimeridian average correctly; the mean longitude is folded
    back into [-180, 180]. A single point is returned as-is.
    """
    if len(lats) == 0 or len(lats) != len(lons):
        raise ValueError("need equal, nonzero numbers of latitudes and longitudes")
    base = lons[0]
    lat_sum = 0.0
    lon_sum = 0.0
    for lat in lats:
        lat_sum += lat
    for lon in lons:
        lon_sum += unwrap_longitude(lon, base)
    n = len(lats)
    mean_lon = lon_sum / n
    if mean_lon > 180.0:
        mean_lon -= 360.0
    elif mean_lon < -180.0:
        mean_lon += 360.0
    return lat_sum / n, mean_lon


def daily_mean_coordinate(points: Sequence[GeoPoint]) -> GeoPoint:
    """Mean coordinate of a day's observations (see :func:`mean_coordinate`)."""
    lat, lon = mean_coordinate([p.lat for p in points], [p.lon for p in points])
    return GeoPoint(lat, lon)
