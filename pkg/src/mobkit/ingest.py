"""Parsing, sanitation and spatial lookup for raw pipeline inputs.

Three input families are handled here:

* observation CSVs with header ``device_id,lat,lon,uncertainty_m,timestamp``
  (timestamps are local time, ISO-8601, no zone offset);
* region files: GeoJSON FeatureCollections whose features carry
  ``region_id``, ``country_code`` and ``population`` properties plus a
  polygon geometry;
* external mobility-index CSVs in the community-mobility-report layout
  (``country_region_code``, ``date``, ``<category>_percent_change_from_baseline``
  columns; country-level rows have empty sub-region fields).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from datetime import date, datetime
from pathlib import Path
from typing import IO, Iterable, Sequence, Union

from shapely.geometry import Point, shape
from shapely.geometry.base import BaseGeometry
from shapely.prepared import prep
from shapely.validation import explain_validity

from .geodesy import GeoPoint

OBSERVATION_HEADER = ["device_id", "lat", "lon", "uncertainty_m", "timestamp"]
DEFAULT_UNCERTAINTY_M = 25.0
MIN_SPACING_SECONDS = 20 * 60
REFERENCE_INDEX_NAMES = ("transit_stations", "residential", "workplaces")

_SUBDIVISION_COLUMNS = ("sub_region_1", "sub_region_2", "metro_area")


class IngestError(Exception):
    """Fatal problem with an input file (unreadable, wrong schema, bad region)."""


@dataclass(frozen=True)
class ObservationRecord:
    """One raw location fix: who, where, how precise, when (local time)."""

    device_id: str
    lat: float
    lon: float
    uncertainty_m: float
    timestamp: datetime


@dataclass(frozen=True)
class RowError:
    """A malformed CSV row that was skipped during parsing."""

    line_number: int
    message: str


@dataclass(frozen=True)
class SanitationReport:
    """Counts of what sanitation did; output + removed always equals input."""

    input_count: int
    zero_coordinate_removed: int
    spacing_thinned: int
    uncertainty_replaced: int
    output_count: int

    @property
    def replacement_fraction(self) -> float:
        """Share of input records whose non-positive uncertainty was replaced."""
        if self.input_count == 0:
            return 0.0
        return self.uncertainty_replaced / self.input_count


def parse_observations(stream: Iterable[str]) -> tuple[list[ObservationRecord], list[RowError]]:
    """Parse an observation CSV stream.

    Returns (records, row_errors). Malformed rows are skipped and reported
    with their line number; an unreadable stream or a wrong header is fatal.
    """
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise IngestError("observation stream is empty (missing header)") from None
    except (OSError, UnicodeDecodeError, csv.Error) as exc:
        raise IngestError(f"unreadable observation stream: {exc}") from exc
    if [h.strip() for h in header] != OBSERVATION_HEADER:
        raise IngestError(f"unexpected observation header: {header!r}")

    records: list[ObservationRecord] = []
    errors: list[RowError] = []
    line_number = 1
    try:
        for row in reader:
            line_number += 1
            if not row:
                continue
            if len(row) != len(OBSERVATION_HEADER):
                errors.append(RowError(line_number, f"expected 5 fields, got {len(row)}"))
                continue
            device_id, lat_s, lon_s, unc_s, ts_s = (field.strip() for field in row)
            if not device_id:
                errors.append(RowError(line_number, "empty device_id"))
                continue
            try:
                lat = float(lat_s)
                lon = float(lon_s)
                uncertainty = float(unc_s)
            except ValueError:
                errors.append(RowError(line_number, "non-numeric coordinate or uncertainty"))
                continue
            if not (math.isfinite(lat) and math.isfinite(lon) and math.isfinite(uncertainty)):
                errors.append(RowError(line_number, "non-finite coordinate or uncertainty"))
                continue
            if not -90.0 <= lat <= 90.0:
                errors.append(RowError(line_number, f"latitude out of range: {lat_s}"))
                continue
            if not -180.0 <= lon <= 180.0:
                errors.append(RowError(line_number, f"longitude out of range: {lon_s}"))
                continue
            try:
                timestamp = datetime.fromisoformat(ts_s)
            except ValueError:
                errors.append(RowError(line_number, f"bad timestamp: {ts_s!r}"))
                continue
            if timestamp.tzinfo is not None:
                errors.append(RowError(line_number, "timezone offsets are not allowed"))
                continue
            records.append(ObservationRecord(device_id, lat, lon, uncertainty, timestamp))
    except (OSError, UnicodeDecodeError, csv.Error) as exc:
        raise IngestError(f"unreadable observation stream near line {line_number}: {exc}") from exc
    return records, errors


def sanitize(records: Sequence[ObservationRecord]) -> tuple[list[ObservationRecord], SanitationReport]:
    """Clean raw records ahead of estimation.

    Per device (time-ordered): drop exact (0, 0) coordinates, thin any record
    closer than 20 minutes to the previously kept one (the earlier record
    wins), and replace non-positive uncertainties with 25 m. Idempotent.
    """
    groups: dict[str, list[ObservationRecord]] = {}
    for record in records:
        groups.setdefault(record.device_id, []).append(record)

    kept: list[ObservationRecord] = []
    zero_removed = 0
    thinned = 0
    replaced = 0
    for device_id, device_records in groups.items():
        device_records.sort(key=lambda r: r.timestamp)
        last_kept: ObservationRecord | None = None
        for record in device_records:
            if record.lat == 0.0 and record.lon == 0.0:
                zero_removed += 1
                continue
            if (
                last_kept is not None
                and (record.timestamp - last_kept.timestamp).total_seconds() < MIN_SPACING_SECONDS
            ):
                thinned += 1
                continue
            if record.uncertainty_m <= 0.0:
                record = replace(record, uncertainty_m=DEFAULT_UNCERTAINTY_M)
                replaced += 1
            kept.append(record)
            last_kept = record

    report = SanitationReport(
        input_count=len(records),
        zero_coordinate_removed=zero_removed,
        spacing_thinned=thinned,
        uncertainty_replaced=replaced,
        output_count=len(kept),
    )
    return kept, report


class Region:
    """A named polygon with a resident population, belonging to one country."""

    __slots__ = ("region_id", "country_code", "population", "polygon", "_prepared", "_bounds")

    def __init__(self, region_id: str, country_code: str, population: float, polygon: BaseGeometry):
        self.region_id = region_id
        self.country_code = country_code
        self.population = population
        self.polygon = polygon
        self._prepared = prep(polygon)
        self._bounds = polygon.bounds

    def covers(self, lat: float, lon: float) -> bool:
        """Boundary-inclusive containment test."""
        minx, miny, maxx, maxy = self._bounds
        if not (minx <= lon <= maxx and miny <= lat <= maxy):
            return False
        return self._prepared.covers(Point(lon, lat))

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"Region({self.region_id!r}, {self.country_code!r}, pop={self.population})"


class RegionTable:
    """All regions of a run, in file order (file order breaks containment ties)."""

    def __init__(self, regions: Sequence[Region]):
        self.regions = list(regions)
        self._populations: dict[tuple[str, str], float] = {}
        self._by_country: dict[str, list[Region]] = {}
        for region in self.regions:
            key = (region.country_code, region.region_id)
            if key in self._populations:
                raise IngestError(
                    f"duplicate region_id {region.region_id!r} in country {region.country_code!r}"
                )
            if not math.isfinite(region.population) or region.population < 0:
                raise IngestError(f"bad population for region {region.region_id!r}")
            self._populations[key] = region.population
            self._by_country.setdefault(region.country_code, []).append(region)

    @classmethod
    def from_geojson(cls, source: Union[str, Path, IO[str]]) -> "RegionTable":
        """Load a FeatureCollection of polygon features with region properties."""
        if isinstance(source, (str, Path)):
            try:
                with open(source, "r", encoding="utf-8") as handle:
                    document = json.load(handle)
            except OSError as exc:
                raise IngestError(f"cannot read region file {source}: {exc}") from exc
            except json.JSONDecodeError as exc:
                raise IngestError(f"region file {source} is not valid JSON: {exc}") from exc
        else:
            try:
                document = json.load(source)
            except json.JSONDecodeError as exc:
                raise IngestError(f"region stream is not valid JSON: {exc}") from exc
        if not isinstance(document, dict) or document.get("type") != "FeatureCollection":
            raise IngestError("region file must be a GeoJSON FeatureCollection")
        regions = []
        for i, feature in enumerate(document.get("features", [])):
            properties = feature.get("properties") or {}
            missing = [k for k in ("region_id", "country_code", "population") if k not in properties]
            if missing:
                raise IngestError(f"feature {i} is missing properties: {', '.join(missing)}")
            geometry = feature.get("geometry") or {}
            if geometry.get("type") != "Polygon":
                raise IngestError(
                    f"feature {i} ({properties.get('region_id')!r}): unsupported geometry "
                    f"{geometry.get('type')!r}, only Polygon is accepted"
                )
            try:
                polygon = shape(geometry)
            except (ValueError, TypeError) as exc:
                raise IngestError(f"feature {i}: malformed polygon: {exc}") from exc
            if polygon.is_empty or not polygon.is_valid:
                raise IngestError(
                    f"feature {i} ({properties.get('region_id')!r}): invalid polygon "
                    f"({explain_validity(polygon)})"
                )
            regions.append(
                Region(
                    region_id=str(properties["region_id"]),
                    country_code=str(properties["country_code"]),
                    population=float(properties["population"]),
                    polygon=polygon,
                )
            )
        return cls(regions)

    def countries(self) -> list[str]:
        return sorted(self._by_country)

    def regions_for(self, country_code: str) -> list[Region]:
        return self._by_country.get(country_code, [])

    def population(self, country_code: str, region_id: str) -> float:
        return self._populations[(country_code, region_id)]

    def country_population(self, country_code: str) -> float:
        return sum(r.population for r in self._by_country.get(country_code, []))


def assign_region(point: Union[GeoPoint, tuple[float, float]], table: RegionTable) -> Region | None:
    """First region (in file order) that covers the point, or None.

    Containment is boundary-inclusive, so a point on a shared edge goes to
    whichever matching region appears first in the file.
    """
    if isinstance(point, GeoPoint):
        lat, lon = point.lat, point.lon
    else:
        lat, lon = point
    for region in table.regions:
        if region.covers(lat, lon):
            return region
    return None


@dataclass(frozen=True)
class ReferenceIndexSeries:
    """One country's daily series for one external mobility index."""

    country_code: str
    index_name: str
    values: dict[date, float]


def parse_reference_indices(stream: Iterable[str], country_code: str) -> dict[str, ReferenceIndexSeries]:
    """Extract country-level index series from a community-mobility-report CSV.

    Only rows whose ``country_region_code`` equals ``country_code`` and whose
    sub-region fields are all empty are used. Missing cells leave a gap for
    that date; a duplicated date for the country is fatal.
    """
    reader = csv.DictReader(stream)
    if reader.fieldnames is None:
        raise IngestError("reference index stream is empty")
    fieldnames = set(reader.fieldnames)
    value_columns = {name: f"{name}_percent_change_from_baseline" for name in REFERENCE_INDEX_NAMES}
    required = {"country_region_code", "date"} | set(value_columns.values())
    missing = sorted(required - fieldnames)
    if missing:
        raise IngestError(f"reference index file is missing columns: {', '.join(missing)}")
    subdivision_columns = [c for c in _SUBDIVISION_COLUMNS if c in fieldnames]

    values: dict[str, dict[date, float]] = {name: {} for name in REFERENCE_INDEX_NAMES}
    seen_dates: set[date] = set()
    found_country = False
    for row in reader:
        if row.get("country_region_code") != country_code:
            continue
        if any((row.get(c) or "").strip() for c in subdivision_columns):
            continue
        found_country = True
        raw_date = (row.get("date") or "").strip()
        try:
            day = date.fromisoformat(raw_date)
        except ValueError as exc:
            raise IngestError(f"bad date {raw_date!r} in reference index file") from exc
        if day in seen_dates:
            raise IngestError(f"duplicate date {day.isoformat()} for country {country_code!r}")
        seen_dates.add(day)
        for name, column in value_columns.items():
            cell = (row.get(column) or "").strip()
            if cell:
                try:
                    values[name][day] = float(cell)
                except ValueError as exc:
                    raise IngestError(f"bad value {cell!r} in column {column} on {day}") from exc
    if not found_country:
        raise IngestError(f"no series for country {country_code!r} in reference index file")
    return {
        name: ReferenceIndexSeries(country_code, name, dict(sorted(values[name].items())))
        for name in REFERENCE_INDEX_NAMES
    }
