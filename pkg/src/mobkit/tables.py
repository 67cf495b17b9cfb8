"""Versioned CSV formats for pipeline outputs.

Every file starts with a ``# mobkit <kind> v1`` line so downstream commands
can refuse inputs written by an incompatible version instead of silently
misreading them. Missing metric values are empty cells; floats are written
with ``repr`` so files round-trip bit-exactly.
"""

from __future__ import annotations

import csv
import datetime as dt
from pathlib import Path
from typing import IO, Iterable, Iterator, Sequence, Union

from .analysis import CorrelationResult, SweepCell
from .metrics import CountryDailyMetric
from .smoothing import SmoothedDailyMetric

METRICS_SIGNATURE = "# mobkit metrics v1"
SMOOTHED_SIGNATURE = "# mobkit smoothed v1"
CORRELATIONS_SIGNATURE = "# mobkit correlations v1"
SENSITIVITY_SIGNATURE = "# mobkit sensitivity v1"
REGRESSION_SIGNATURE = "# mobkit regression v1"

METRICS_COLUMNS = ["country", "day", "date", "M1_km", "M2", "N",
                   "M1_lo", "M1_hi", "M2_lo", "M2_hi"]
SMOOTHED_COLUMNS = METRICS_COLUMNS + ["q"]
CORRELATIONS_COLUMNS = ["country", "metric", "index", "q", "abs_rho", "n_days"]
SENSITIVITY_COLUMNS = ["n", "r", "z", "rho1_abs", "rho2_abs"]
REGRESSION_COLUMNS = ["metric", "index", "q", "n_countries", "beta0", "beta1", "phi",
                      "pseudo_r2", "lr_statistic", "p_value", "f_statistic", "p_value_f"]


class FormatVersionError(Exception):
    """The file's signature line does not match the expected format."""


def _fmt(value: Union[float, None]) -> str:
    return "" if value is None else repr(value)


def _parse_float(cell: str) -> Union[float, None]:
    return None if cell == "" else float(cell)


def _open_versioned(handle: IO[str], signature: str) -> Iterator[list[str]]:
    """Yield csv rows after checking the signature line; skips the header row."""
    first = handle.readline().rstrip("\r\n")
    if first != signature:
        raise FormatVersionError(
            f"expected signature {signature!r}, found {first!r}"
        )
    reader = csv.reader(handle)
    try:
        next(reader)  # column header
    except StopIteration:
        return
    yield from reader


def _write_versioned(path: Union[str, Path], signature: str, columns: Sequence[str],
                     rows: Iterable[Sequence[object]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(signature + "\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow(row)


# ---------------------------------------------------------------------------
# Daily metrics
# ---------------------------------------------------------------------------


def _metric_cells(metric: CountryDailyMetric) -> list[object]:
    return [
        metric.country_code,
        metric.day,
        metric.date.isoformat(),
        _fmt(metric.m1_km),
        _fmt(metric.m2),
        metric.n,
        _fmt(metric.m1_lo),
        _fmt(metric.m1_hi),
        _fmt(metric.m2_lo),
        _fmt(metric.m2_hi),
    ]


def write_metrics_csv(metrics: Iterable[CountryDailyMetric], path: Union[str, Path]) -> None:
    _write_versioned(path, METRICS_SIGNATURE, METRICS_COLUMNS,
                     (_metric_cells(m) for m in metrics))


def read_metrics_csv(path: Union[str, Path]) -> list[CountryDailyMetric]:
    out: list[CountryDailyMetric] = []
    with open(path, "r", encoding="utf-8", newline="") as handle:
        for row in _open_versioned(handle, METRICS_SIGNATURE):
            if not row:
                continue
            out.append(
                CountryDailyMetric(
                    country_code=row[0],
                    day=int(row[1]),
                    date=dt.date.fromisoformat(row[2]),
                    m1_km=_parse_float(row[3]),
                    m2=_parse_float(row[4]),
                    n=int(row[5]),
                    m1_lo=_parse_float(row[6]),
                    m1_hi=_parse_float(row[7]),
                    m2_lo=_parse_float(row[8]),
                    m2_hi=_parse_float(row[9]),
                )
            )
    return out


# ---------------------------------------------------------------------------
# Smoothed metrics
# ---------------------------------------------------------------------------


def write_smoothed_csv(metrics: Iterable[SmoothedDailyMetric], path: Union[str, Path]) -> None:
    def cells() -> Iterator[list[object]]:
        for m in metrics:
            yield [
                m.country_code,
                m.day,
                m.date.isoformat(),
                _fmt(m.m1_km),
                _fmt(m.m2),
                m.n,
                _fmt(m.m1_lo),
                _fmt(m.m1_hi),
                _fmt(m.m2_lo),
                _fmt(m.m2_hi),
                m.q,
            ]

    _write_versioned(path, SMOOTHED_SIGNATURE, SMOOTHED_COLUMNS, cells())


def read_smoothed_csv(path: Union[str, Path]) -> list[SmoothedDailyMetric]:
    out: list[SmoothedDailyMetric] = []
    with open(path, "r", encoding="utf-8", newline="") as handle:
        for row in _open_versioned(handle, SMOOTHED_SIGNATURE):
            if not row:
                continue
            out.append(
                SmoothedDailyMetric(
                    country_code=row[0],
                    q=int(row[10]),
                    day=int(row[1]),
                    date=dt.date.fromisoformat(row[2]),
                    m1_km=_parse_float(row[3]),
                    m2=_parse_float(row[4]),
                    n=int(row[5]),
                    m1_lo=_parse_float(row[6]),
                    m1_hi=_parse_float(row[7]),
                    m2_lo=_parse_float(row[8]),
                    m2_hi=_parse_float(row[9]),
                )
            )
    return out


# ---------------------------------------------------------------------------
# Correlations
# ---------------------------------------------------------------------------


def write_correlations_csv(results: Iterable[CorrelationResult], path: Union[str, Path]) -> None:
    rows = (
        [r.country_code, r.metric, r.index_name, r.q, repr(r.abs_correlation), r.paired_days]
        for r in results
    )
    _write_versioned(path, CORRELATIONS_SIGNATURE, CORRELATIONS_COLUMNS, rows)


def read_correlations_csv(path: Union[str, Path]) -> list[CorrelationResult]:
    out: list[CorrelationResult] = []
    with open(path, "r", encoding="utf-8", newline="") as handle:
        for row in _open_versioned(handle, CORRELATIONS_SIGNATURE):
            if not row:
                continue
            out.append(
                CorrelationResult(
                    country_code=row[0],
                    metric=row[1],
                    index_name=row[2],
                    q=int(row[3]),
                    abs_correlation=float(row[4]),
                    paired_days=int(row[5]),
                )
            )
    return out


# ---------------------------------------------------------------------------
# Sensitivity sweep
# ---------------------------------------------------------------------------


def write_sensitivity_csv(cells: Iterable[SweepCell], path: Union[str, Path]) -> None:
    rows = (
        [c.n, repr(c.r), repr(c.z), _fmt(c.rho1_abs), _fmt(c.rho2_abs)]
        for c in cells
    )
    _write_versioned(path, SENSITIVITY_SIGNATURE, SENSITIVITY_COLUMNS, rows)


def read_sensitivity_csv(path: Union[str, Path]) -> list[SweepCell]:
    out: list[SweepCell] = []
    with open(path, "r", encoding="utf-8", newline="") as handle:
        for row in _open_versioned(handle, SENSITIVITY_SIGNATURE):
            if not row:
                continue
            out.append(
                SweepCell(
                    n=int(row[0]),
                    r=float(row[1]),
                    z=float(row[2]),
                    rho1_abs=_parse_float(row[3]),
                    rho2_abs=_parse_float(row[4]),
                )
            )
    return out


# ---------------------------------------------------------------------------
# Regression report
# ---------------------------------------------------------------------------


def write_regression_csv(rows: Iterable[Sequence[object]], path: Union[str, Path]) -> None:
    """Rows are pre-formatted cell sequences matching REGRESSION_COLUMNS."""
    _write_versioned(path, REGRESSION_SIGNATURE, REGRESSION_COLUMNS, rows)


def read_regression_csv(path: Union[str, Path]) -> list[dict[str, str]]:
    out: list[dict[str, str]] = []
    with open(path, "r", encoding="utf-8", newline="") as handle:
        for row in _open_versioned(handle, REGRESSION_SIGNATURE):
            if not row:
                continue
            out.append(dict(zip(REGRESSION_COLUMNS, row)))
    return out
