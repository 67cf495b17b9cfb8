"""Command-line interface.

Subcommands form a pipeline over a shared flat ``key = value`` config file::

    mobkit simulate    --config run.cfg   # synthetic world + ground truth
    mobkit estimate    --config run.cfg   # daily country metrics + intervals
    mobkit smooth      --config run.cfg   # trailing-window pooled metrics
    mobkit correlate   --config run.cfg   # |rho| vs external mobility indices
    mobkit regress     --config run.cfg   # penetration -> |rho| beta regression
    mobkit sensitivity --config run.cfg   # parameter sweep for one country

Exit codes: 0 on success, 1 for anticipated problems (bad config, unreadable
or mismatched inputs, nothing qualifying), 2 for unexpected failures.
Relative input/output paths in the config resolve against the config file's
directory; ``--output``, ``--seed`` and ``--threads`` override the config and
``--set KEY=VALUE`` overrides any key.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime as dt
import logging
import math
import sys
import traceback
from pathlib import Path
from typing import Callable, Sequence, Union

from .analysis import (
    CorrelationResult,
    UndefinedCorrelationError,
    correlate,
    fit_beta_regression,
    penetration,
    sensitivity_sweep,
)
from .ingest import (
    IngestError,
    ObservationRecord,
    RegionTable,
    SanitationReport,
    parse_observations,
    parse_reference_indices,
    sanitize,
)
from .metrics import (
    EstimationError,
    EstimationParams,
    daily_aggregates_by_date,
    daily_series,
    period_dates,
    summarize,
    value_panel,
)
from .smoothing import SmoothedDailyMetric, smoothed_series
from .synthgen import (
    InfeasibleConfigError,
    RectRegion,
    SyntheticWorldConfig,
    generate,
    make_reference_rows,
    write_reference_csv,
    write_world,
)
from .tables import (
    FormatVersionError,
    read_correlations_csv,
    read_metrics_csv,
    read_smoothed_csv,
    write_correlations_csv,
    write_metrics_csv,
    write_sensitivity_csv,
    write_smoothed_csv,
    write_regression_csv,
)
from .uncertainty import BootstrapConfig, attach_intervals, attach_smoothed_intervals

LOG = logging.getLogger("mobkit")

METRIC_INDEX_PAIRINGS = (
    ("M1", "transit_stations"),
    ("M2", "residential"),
    ("M2", "workplaces"),
)


class ConfigError(Exception):
    """The run configuration is missing, malformed or inconsistent."""


# ---------------------------------------------------------------------------
# Config file
# ---------------------------------------------------------------------------


def _as_bool(raw: str) -> bool:
    lowered = raw.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _as_date(raw: str) -> dt.date:
    return dt.date.fromisoformat(raw)


def _as_str_tuple(raw: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in raw.split(",") if part.strip())


def _as_int_tuple(raw: str) -> tuple[int, ...]:
    return tuple(int(part) for part in _as_str_tuple(raw))


def _as_float_tuple(raw: str) -> tuple[float, ...]:
    return tuple(float(part) for part in _as_str_tuple(raw))


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Effective settings for one CLI run (config file plus overrides)."""

    observations: Union[str, None] = None
    regions: Union[str, None] = None
    reference_indices: Union[str, None] = None
    countries: tuple[str, ...] = ()
    start_date: Union[dt.date, None] = None
    end_date: Union[dt.date, None] = None
    min_observations: int = 12
    uncertainty_multiplier: float = 1.0
    stationary_threshold_km: float = 0.2
    min_span_hours: float = 12.0
    bootstrap_iterations: int = 1000
    bootstrap_alpha: float = 5.0
    seed: int = 0
    threads: int = 1
    smoothing_windows: tuple[int, ...] = (7, 14, 21, 28)
    correlation_windows: tuple[int, ...] = (1, 7, 14, 21, 28)
    sensitivity_country: Union[str, None] = None
    output_dir: Union[str, None] = None
    # synthetic-world settings (simulate)
    agents: int = 100
    days: int = 30
    observations_per_day: int = 12
    stay_probability: float = 0.3
    travel_lognorm_mu: float = math.log(3.0)
    travel_lognorm_sigma: float = 0.5
    uncertainty_choices: tuple[float, ...] = (10.0, 25.0, 50.0)
    jitter: bool = True
    regions_spec: Union[str, None] = None


_CONVERTERS: dict[str, Callable[[str], object]] = {
    "observations": str,
    "regions": str,
    "reference_indices": str,
    "countries": _as_str_tuple,
    "start_date": _as_date,
    "end_date": _as_date,
    "min_observations": int,
    "uncertainty_multiplier": float,
    "stationary_threshold_km": float,
    "min_span_hours": float,
    "bootstrap_iterations": int,
    "bootstrap_alpha": float,
    "seed": int,
    "threads": int,
    "smoothing_windows": _as_int_tuple,
    "correlation_windows": _as_int_tuple,
    "sensitivity_country": str,
    "output_dir": str,
    "agents": int,
    "days": int,
    "observations_per_day": int,
    "stay_probability": float,
    "travel_lognorm_mu": float,
    "travel_lognorm_sigma": float,
    "uncertainty_choices": _as_float_tuple,
    "jitter": _as_bool,
    "regions_spec": str,
}

_PATH_KEYS = ("observations", "regions", "reference_indices", "output_dir")


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """``key = value`` lines; blank lines and full-line ``#`` comments ignored."""
    pairs: dict[str, str] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{number}: expected 'key = value', got {stripped!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"{source}:{number}: empty key")
        if key in pairs:
            raise ConfigError(f"{source}:{number}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def build_config(pairs: dict[str, str], base_dir: Union[Path, None] = None) -> RunConfig:
    """Typed config from raw pairs; unknown keys and bad values are errors."""
    values: dict[str, object] = {}
    for key, raw in pairs.items():
        converter = _CONVERTERS.get(key)
        if converter is None:
            raise ConfigError(
                f"unknown config key {key!r} (valid: {', '.join(sorted(_CONVERTERS))})"
            )
        try:
            values[key] = converter(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}") from exc
    config = RunConfig(**values)
    if base_dir is not None:
        resolved = {}
        for key in _PATH_KEYS:
            value = getattr(config, key)
            if value is not None and not Path(value).is_absolute():
                resolved[key] = str(base_dir / value)
        if resolved:
            config = dataclasses.replace(config, **resolved)
    return config


def load_config(path: Union[str, Path], overrides: Sequence[str] = ()) -> RunConfig:
    config_path = Path(path)
    try:
        text = config_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {config_path}: {exc}") from exc
    pairs = parse_config_text(text, source=str(config_path))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, _, value = item.partition("=")
        pairs[key.strip()] = value.strip()
    return build_config(pairs, base_dir=config_path.parent.resolve())


def _require(config: RunConfig, command: str, names: Sequence[str]) -> None:
    missing = [name for name in names if getattr(config, name) in (None, ())]
    if missing:
        raise ConfigError(f"'{command}' needs config keys: {', '.join(missing)}")


# ---------------------------------------------------------------------------
# Shared command plumbing
# ---------------------------------------------------------------------------


def _estimation_params(config: RunConfig) -> EstimationParams:
    return EstimationParams(
        min_observations=config.min_observations,
        uncertainty_multiplier=config.uncertainty_multiplier,
        stationary_threshold_km=config.stationary_threshold_km,
        min_span_hours=config.min_span_hours,
    )


def _bootstrap_config(config: RunConfig) -> Union[BootstrapConfig, None]:
    """None disables interval attachment (bootstrap_iterations = 0)."""
    if config.bootstrap_iterations == 0:
        return None
    return BootstrapConfig(
        iterations=config.bootstrap_iterations,
        alpha=config.bootstrap_alpha,
        seed=config.seed,
    )


def _load_clean_observations(config: RunConfig) -> tuple[list[ObservationRecord], SanitationReport]:
    with open(config.observations, "r", encoding="utf-8", newline="") as handle:
        records, row_errors = parse_observations(handle)
    if row_errors:
        first = row_errors[0]
        LOG.warning(
            "dropped %d malformed rows (first: line %d: %s)",
            len(row_errors), first.line_number, first.message,
        )
    clean, report = sanitize(records)
    LOG.info(
        "sanitation: %d rows in, %d kept; removed %d zero-coordinate, "
        "thinned %d under-spaced, replaced %d non-positive uncertainties "
        "(%.4f of input)",
        report.input_count, report.output_count, report.zero_coordinate_removed,
        report.spacing_thinned, report.uncertainty_replaced, report.replacement_fraction,
    )
    return clean, report


def _load_regions(config: RunConfig) -> RegionTable:
    return RegionTable.from_geojson(config.regions)


def _target_countries(config: RunConfig, table: RegionTable) -> list[str]:
    available = table.countries()
    if not config.countries:
        return available
    unknown = [c for c in config.countries if c not in available]
    if unknown:
        raise ConfigError(f"countries not present in regions file: {', '.join(unknown)}")
    return list(config.countries)


def _load_index_series(config: RunConfig, country_code: str):
    with open(config.reference_indices, "r", encoding="utf-8", newline="") as handle:
        return parse_reference_indices(handle, country_code)


def _output_dir(config: RunConfig) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_simulate(config: RunConfig) -> int:
    _require(config, "simulate", ["regions_spec", "start_date", "output_dir"])
    regions = _parse_regions_spec(config.regions_spec)
    world_config = SyntheticWorldConfig(
        regions=regions,
        n_agents=config.agents,
        days=config.days,
        start_date=config.start_date,
        observations_per_day=config.observations_per_day,
        stay_probability=config.stay_probability,
        travel_lognorm_mu=config.travel_lognorm_mu,
        travel_lognorm_sigma=config.travel_lognorm_sigma,
        uncertainty_choices=config.uncertainty_choices,
        jitter=config.jitter,
        stationary_threshold_km=config.stationary_threshold_km,
        seed=config.seed,
    )
    world = generate(world_config)
    out = _output_dir(config)
    paths = write_world(world, out)
    reference_path = out / "reference_indices.csv"
    write_reference_csv(make_reference_rows(world.truth, seed=config.seed), reference_path)
    LOG.info(
        "simulated %d agents x %d days (%d observations) into %s",
        config.agents, config.days, len(world.observations), out,
    )
    for name, path in {**paths, "reference_indices": reference_path}.items():
        LOG.info("wrote %s: %s", name, path)
    return 0


def _parse_regions_spec(spec: str) -> tuple[RectRegion, ...]:
    """``CC:RID:lon_min:lat_min:lon_max:lat_max:population`` joined by ';'."""
    regions = []
    for chunk in spec.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(":")
        if len(parts) != 7:
            raise ConfigError(
                f"bad regions_spec entry {chunk!r}: expected "
                "CC:RID:lon_min:lat_min:lon_max:lat_max:population"
            )
        try:
            region = RectRegion(
                country_code=parts[0],
                region_id=parts[1],
                lon_min=float(parts[2]),
                lat_min=float(parts[3]),
                lon_max=float(parts[4]),
                lat_max=float(parts[5]),
                population=float(parts[6]),
            )
        except ValueError as exc:
            raise ConfigError(f"bad regions_spec entry {chunk!r}: {exc}") from exc
        regions.append(region)
    if not regions:
        raise ConfigError("regions_spec defines no regions")
    return tuple(regions)


def cmd_estimate(config: RunConfig) -> int:
    _require(config, "estimate",
             ["observations", "regions", "start_date", "end_date", "output_dir"])
    table = _load_regions(config)
    countries = _target_countries(config, table)
    params = _estimation_params(config)
    LOG.info("estimation parameters: %s", params)
    clean, _ = _load_clean_observations(config)
    summaries = summarize(clean, table, params)
    assigned = sum(1 for s in summaries if s.region_id is not None)
    LOG.info("qualifying device-days: %d (%d assigned to a region)", len(summaries), assigned)
    if assigned == 0:
        raise EstimationError("no qualifying trajectories fall inside any region")
    dates = period_dates(config.start_date, config.end_date)
    panel = value_panel(summaries)
    bootstrap = _bootstrap_config(config)
    out = _output_dir(config)
    for country in countries:
        series = daily_series(summaries, table, country, dates)
        if bootstrap is not None:
            series = attach_intervals(
                series, panel.get(country, {}), table, bootstrap, country, dates,
                threads=config.threads,
            )
        path = out / f"metrics_{country}.csv"
        write_metrics_csv(series, path)
        observed = sum(1 for m in series if m.m1_km is not None)
        LOG.info("wrote %s (%d/%d days observed)", path, observed, len(series))
    return 0


def cmd_smooth(config: RunConfig) -> int:
    _require(config, "smooth",
             ["observations", "regions", "start_date", "end_date", "output_dir",
              "smoothing_windows"])
    if any(q < 1 for q in config.smoothing_windows):
        raise ConfigError("smoothing_windows must all be >= 1")
    table = _load_regions(config)
    countries = _target_countries(config, table)
    params = _estimation_params(config)
    clean, _ = _load_clean_observations(config)
    summaries = summarize(clean, table, params)
    if not any(s.region_id is not None for s in summaries):
        raise EstimationError("no qualifying trajectories fall inside any region")
    dates = period_dates(config.start_date, config.end_date)
    panel = value_panel(summaries)
    bootstrap = _bootstrap_config(config)
    out = _output_dir(config)
    for country in countries:
        aggregates = daily_aggregates_by_date(summaries, country)
        stacked: list[SmoothedDailyMetric] = []
        for q in config.smoothing_windows:
            series = smoothed_series(aggregates, table, country, dates, q)
            if bootstrap is not None:
                series = attach_smoothed_intervals(
                    series, panel.get(country, {}), table, bootstrap, country, dates,
                    threads=config.threads,
                )
            stacked.extend(series)
        path = out / f"smoothed_{country}.csv"
        write_smoothed_csv(stacked, path)
        LOG.info("wrote %s (windows: %s)",
                 path, ",".join(str(q) for q in config.smoothing_windows))
    return 0


def _metric_date_series(
    rows: Sequence, metric: str
) -> dict[dt.date, float]:
    attribute = "m1_km" if metric == "M1" else "m2"
    return {
        row.date: getattr(row, attribute)
        for row in rows
        if getattr(row, attribute) is not None
    }


def cmd_correlate(config: RunConfig) -> int:
    _require(config, "correlate",
             ["reference_indices", "output_dir", "correlation_windows"])
    out = _output_dir(config)
    countries = list(config.countries)
    if not countries:
        countries = sorted(
            path.stem.removeprefix("metrics_") for path in out.glob("metrics_*.csv")
        )
    if not countries:
        LOG.error("no metrics files in %s; run 'estimate' first", out)
        return 1
    needs_smoothed = [q for q in config.correlation_windows if q > 1]
    results: list[CorrelationResult] = []
    for country in countries:
        metrics_rows = read_metrics_csv(out / f"metrics_{country}.csv")
        smoothed_rows = []
        if needs_smoothed:
            smoothed_rows = read_smoothed_csv(out / f"smoothed_{country}.csv")
        index_series = _load_index_series(config, country)
        for q in config.correlation_windows:
            if q == 1:
                source_rows: Sequence = metrics_rows
            else:
                source_rows = [row for row in smoothed_rows if row.q == q]
                if not source_rows:
                    LOG.warning(
                        "no q=%d rows in smoothed_%s.csv; skipping that window", q, country
                    )
                    continue
            for metric, index_name in METRIC_INDEX_PAIRINGS:
                series = _metric_date_series(source_rows, metric)
                try:
                    results.append(
                        correlate(
                            series,
                            index_series[index_name].values,
                            country_code=country,
                            metric=metric,
                            index_name=index_name,
                            q=q,
                        )
                    )
                except UndefinedCorrelationError as exc:
                    LOG.warning("correlation undefined, skipped: %s", exc)
    if not results:
        LOG.error("no correlation is defined for any country/metric/index/window")
        return 1
    results.sort(key=lambda r: (r.country_code, r.metric, r.index_name, r.q))
    path = out / "correlations.csv"
    write_correlations_csv(results, path)
    LOG.info("wrote %s (%d correlations)", path, len(results))
    return 0


def cmd_regress(config: RunConfig) -> int:
    _require(config, "regress", ["regions", "start_date", "end_date", "output_dir"])
    out = _output_dir(config)
    table = _load_regions(config)
    correlations = read_correlations_csv(out / "correlations.csv")
    if not correlations:
        LOG.error("correlations.csv is empty; run 'correlate' first")
        return 1
    dates = period_dates(config.start_date, config.end_date)
    penetrations = {}
    for country in sorted({r.country_code for r in correlations}):
        population = table.country_population(country)
        if population <= 0:
            raise ConfigError(
                f"country {country!r} from correlations.csv has no population "
                "in the regions file"
            )
        metrics_rows = read_metrics_csv(out / f"metrics_{country}.csv")
        sizes = {row.date: row.n for row in metrics_rows}
        penetrations[country] = penetration(sizes, dates, population, country)
        LOG.info(
            "%s: mean daily sample %.2f of population %.0f -> penetration %.3e",
            country, penetrations[country].average_sample_size,
            population, penetrations[country].penetration,
        )

    groups: dict[tuple[str, str, int], list[CorrelationResult]] = {}
    for result in correlations:
        groups.setdefault((result.metric, result.index_name, result.q), []).append(result)

    report_rows: list[list[object]] = []
    fitted_rows: list[list[object]] = []
    curve_rows: list[list[object]] = []
    summary_lines: list[str] = []
    for (metric, index_name, q) in sorted(groups):
        group = sorted(groups[(metric, index_name, q)], key=lambda r: r.country_code)
        if len(group) < 3:
            LOG.warning(
                "skipping %s~%s q=%d: only %d countries (need 3)",
                metric, index_name, q, len(group),
            )
            continue
        pi = [penetrations[r.country_code].penetration for r in group]
        rho = [r.abs_correlation for r in group]
        fit = fit_beta_regression(pi, rho)
        report_rows.append([
            metric, index_name, q, fit.n_points,
            repr(fit.beta0), repr(fit.beta1), repr(fit.phi), repr(fit.pseudo_r2),
            repr(fit.lr_statistic), repr(fit.p_value),
            repr(fit.f_statistic), repr(fit.p_value_f),
        ])
        for result, fitted in zip(group, fit.fitted):
            fitted_rows.append([
                metric, index_name, q, result.country_code,
                repr(penetrations[result.country_code].penetration),
                repr(result.abs_correlation), repr(float(fitted)),
            ])
        curve_rows.extend(_fit_curve_rows(metric, index_name, q, fit, pi))
        summary_lines.append(
            f"{metric} ~ log10(penetration) vs {index_name} (q={q}, "
            f"{fit.n_points} countries): beta0={fit.beta0:.4f} beta1={fit.beta1:.4f} "
            f"phi={fit.phi:.2f} pseudo-R2={fit.pseudo_r2:.4f} "
            f"LR={fit.lr_statistic:.3f} (p={fit.p_value:.4g}) "
            f"F={fit.f_statistic:.3f} (p={fit.p_value_f:.4g})"
        )
    if not report_rows:
        LOG.error("no (metric, index, window) group has at least 3 countries")
        return 1

    report_path = out / "regression_report.csv"
    write_regression_csv(report_rows, report_path)
    _write_aux_csv(
        out / "regression_fitted.csv", "# mobkit regression-fitted v1",
        ["metric", "index", "q", "country", "penetration", "abs_rho", "fitted"],
        fitted_rows,
    )
    _write_aux_csv(
        out / "regression_curve.csv", "# mobkit regression-curve v1",
        ["metric", "index", "q", "penetration", "fitted_abs_rho"],
        curve_rows,
    )
    summary_path = out / "regression_summary.txt"
    summary_path.write_text("\n".join(summary_lines) + "\n", encoding="utf-8")
    LOG.info("wrote %s (%d fits), %s, %s and %s",
             report_path, len(report_rows), out / "regression_fitted.csv",
             out / "regression_curve.csv", summary_path)
    return 0


def _fit_curve_rows(metric, index_name, q, fit, penetrations, points: int = 50):
    import numpy as np
    from scipy.special import expit

    grid = np.logspace(
        math.log10(min(penetrations)), math.log10(max(penetrations)), points
    )
    mu = expit(fit.beta0 + fit.beta1 * np.log10(grid))
    return [
        [metric, index_name, q, repr(float(p)), repr(float(m))]
        for p, m in zip(grid, mu)
    ]


def _write_aux_csv(path: Path, signature: str, columns: list[str],
                   rows: list[list[object]]) -> None:
    import csv

    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(signature + "\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(rows)


def cmd_sensitivity(config: RunConfig) -> int:
    _require(config, "sensitivity",
             ["observations", "regions", "reference_indices", "sensitivity_country",
              "start_date", "end_date", "output_dir"])
    table = _load_regions(config)
    country = config.sensitivity_country
    if country not in table.countries():
        raise ConfigError(f"sensitivity_country {country!r} not present in regions file")
    clean, _ = _load_clean_observations(config)
    index_series = _load_index_series(config, country)
    dates = period_dates(config.start_date, config.end_date)
    cells = sensitivity_sweep(
        clean, table, country,
        index_series["transit_stations"], index_series["residential"], dates,
    )
    out = _output_dir(config)
    path = out / "sensitivity.csv"
    write_sensitivity_csv(cells, path)
    defined = sum(1 for c in cells if c.rho1_abs is not None and c.rho2_abs is not None)
    LOG.info("wrote %s (%d cells, %d fully defined)", path, len(cells), defined)
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "smooth": cmd_smooth,
    "correlate": cmd_correlate,
    "regress": cmd_regress,
    "sensitivity": cmd_sensitivity,
}


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mobkit",
        description="Country-level mobility metrics from smartphone location records.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "generate a synthetic world with ground truth"),
        ("estimate", "daily country metrics with bootstrap intervals"),
        ("smooth", "trailing-window pooled metrics"),
        ("correlate", "absolute correlation against external mobility indices"),
        ("regress", "beta regression of |rho| on log10 penetration"),
        ("sensitivity", "metric correlation across a parameter grid"),
    ):
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument("--config", required=True, help="key = value config file")
        sub.add_argument("--output", help="override output_dir")
        sub.add_argument("--seed", type=int, help="override seed")
        sub.add_argument("--threads", type=int, help="override threads")
        sub.add_argument(
            "--set", action="append", default=[], metavar="KEY=VALUE",
            help="override any config key (repeatable)",
        )
    return parser


def main(argv: Union[Sequence[str], None] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s"
    )
    try:
        config = load_config(args.config, args.set)
        overrides = {}
        if args.output is not None:
            overrides["output_dir"] = args.output
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.threads is not None:
            overrides["threads"] = args.threads
        if overrides:
            config = dataclasses.replace(config, **overrides)
        LOG.info("command %r with config %s", args.command, args.config)
        return COMMANDS[args.command](config)
    except (
        ConfigError,
        IngestError,
        EstimationError,
        FormatVersionError,
        InfeasibleConfigError,
        FileNotFoundError,
        NotADirectoryError,
        ValueError,
    ) as exc:
        LOG.error("%s", exc)
        return 1
    except Exception:  # pragma: no cover - defensive
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
