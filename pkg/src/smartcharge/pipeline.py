"""End-to-end run: load inputs, evaluate every vehicle, aggregate, write reports."""

from __future__ import annotations

import logging
import re
from collections import Counter, defaultdict
from collections.abc import Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from smartcharge.analytics import (
    SCENARIOS,
    BehaviorStats,
    FleetReport,
    SessionOutcome,
    VehicleEvaluation,
    VehicleSummary,
    WindowBehavior,
    aggregate,
    behavior_stats,
    default_study_period,
    evaluate_vehicle,
    observed_days,
    summarize_vehicle,
)
from smartcharge.config import RunConfig
from smartcharge.domain import Catalog, PlugInWindow, parse_timestamp
from smartcharge.errors import EmptyValidSet
from smartcharge.formats import (
    SessionLoad,
    dump_json,
    load_catalog,
    load_hourly_moer,
    load_sessions,
    load_tariffs,
    read_table,
    write_table,
)
from smartcharge.moer import HourlyMoer
from smartcharge.tariff import TariffSchedule, billing_tariff

log = logging.getLogger(__name__)

NOTES = {
    "percent_reduction": "per-vehicle percents use ratio of the vehicle's totals; group 'metrics' are "
    "distributions of those per-vehicle percents, 'totals_pct' is the ratio of group totals",
    "unconstrained_day": "unconstrained region is the union of utility-local calendar days touched by the "
    "plug-in window; windows of one vehicle sharing a day are optimized jointly and the joint cost and "
    "emissions are attributed in proportion to each window's constrained values",
    "moer_resolution": "baseline and optimized emissions both use hourly (UTC clock hour) mean MOER",
    "cost_increased": "counted per plug-in window, with a 1e-9 USD tolerance",
    "tou_split": "a vehicle counts as TOU when its optimized billing tariff is TOU; cost metrics are "
    "reported for TOU groups only",
}

OUTCOME_COLUMNS = [f.name for f in fields(SessionOutcome)] + ["cost_increased"]
VEHICLE_COLUMNS = [f.name for f in fields(VehicleSummary)]
BEHAVIOR_COLUMNS = [f.name for f in fields(WindowBehavior)]
EXIT_OK, EXIT_PARTIAL, EXIT_FATAL = 0, 1, 2


@dataclass
class PipelineResult:
    config: RunConfig
    report: FleetReport
    outcomes: list[SessionOutcome]
    summaries: list[VehicleSummary]
    behavior: BehaviorStats
    behavior_rows: list[WindowBehavior]
    evaluations: dict[str, VehicleEvaluation]
    windows: list[PlugInWindow]
    load: SessionLoad
    data_quality: dict
    files: dict[str, Path] = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        dq = self.data_quality
        return EXIT_PARTIAL if dq["rows_rejected"] or dq["windows_skipped"] else EXIT_OK


def _scenario_key_filter(scenarios: Sequence[str]):
    dropped = [s for s in SCENARIOS if s not in scenarios]
    patterns = []
    if "unconstrained" in dropped:
        patterns.append(re.compile("unconstrained"))
    if "constrained" in dropped:
        patterns.append(re.compile("(?<!un)constrained|cost_increased"))

    def keep(key: str) -> bool:
        return not any(p.search(key) for p in patterns)

    return keep


def _filter_keys(obj, keep):
    if isinstance(obj, Mapping):
        return {k: _filter_keys(v, keep) for k, v in obj.items() if keep(str(k))}
    if isinstance(obj, list):
        return [_filter_keys(v, keep) for v in obj]
    return obj


def _evaluate_chunk(args) -> list[tuple[str, VehicleEvaluation]]:
    chunk, catalog, tariffs, hourly, slot_len, scenarios = args
    return [
        (vid, evaluate_vehicle(ws, catalog, tariffs, hourly, slot_len, scenarios)) for vid, ws in chunk
    ]


def evaluate_fleet(
    windows: Sequence[PlugInWindow],
    catalog: Catalog,
    tariffs: Mapping[str, TariffSchedule],
    hourly: Mapping[str, HourlyMoer],
    slot_len: float,
    scenarios: Sequence[str],
    workers: int = 1,
) -> dict[str, VehicleEvaluation]:
    """Evaluate vehicles independently; results are keyed and ordered by vehicle id."""
    by_vehicle: dict[str, list[PlugInWindow]] = defaultdict(list)
    for w in windows:
        by_vehicle[w.vehicle_id].append(w)
    items = sorted(by_vehicle.items())
    if workers <= 1 or len(items) < 2:
        return dict(_evaluate_chunk((items, catalog, tariffs, hourly, slot_len, tuple(scenarios))))
    n = min(workers, len(items))
    chunks = [items[i::n] for i in range(n)]
    out: dict[str, VehicleEvaluation] = {}
    with ProcessPoolExecutor(max_workers=n) as pool:
        jobs = [(c, catalog, tariffs, hourly, slot_len, tuple(scenarios)) for c in chunks]
        for part in pool.map(_evaluate_chunk, jobs):
            out.update(part)
    return dict(sorted(out.items()))


def summarize_outcomes(
    outcomes: Sequence[SessionOutcome],
    catalog: Catalog,
    study_period,
    annualize_threshold_days: float,
) -> list[VehicleSummary]:
    by_vehicle: dict[str, list[SessionOutcome]] = defaultdict(list)
    for o in outcomes:
        by_vehicle[o.vehicle_id].append(o)
    summaries = []
    for vid in sorted(by_vehicle):
        os_ = by_vehicle[vid]
        zone = catalog.utility(os_[0].utility_id).zone
        days = observed_days([o.plug_in for o in os_], study_period, zone)
        summaries.append(summarize_vehicle(os_, days, annualize_threshold_days))
    return summaries


def _row(obj) -> dict:
    # shallow: dataclasses.asdict deep-copies every datetime, which dominates report writing
    return {f.name: getattr(obj, f.name) for f in fields(obj)}


def _outcome_row(o: SessionOutcome) -> dict:
    row = _row(o)
    row["cost_increased"] = o.cost_increased
    return row


def run_pipeline(config: RunConfig, *, write: bool = True) -> PipelineResult:
    """Load, validate, optimize both scenarios, aggregate and (optionally) write reports.

    Raises :class:`EmptyValidSet` when nothing survives validation and MOER checks.
    """
    catalog = load_catalog(config.catalog)
    tariffs = load_tariffs(config.tariffs, catalog)
    for u in catalog.utilities.values():
        billing_tariff(u, "baseline", tariffs)
        billing_tariff(u, "optimized", tariffs)
    hourly = load_hourly_moer(config.moer)
    load = load_sessions(config.sessions, catalog)
    log.info("loaded %d windows (%d rows rejected)", len(load.windows), len(load.rejects))

    evaluations = evaluate_fleet(
        load.windows, catalog, tariffs, hourly, config.slot_len_seconds, config.scenarios, config.workers
    )
    outcomes = [o for ev in evaluations.values() for o in ev.outcomes]
    skipped = sorted((wid, why) for ev in evaluations.values() for wid, why in ev.skipped)
    reasons = Counter(r.error for r in load.rejects) + Counter(why for _, why in skipped)
    if not outcomes:
        raise EmptyValidSet(dict(reasons))

    study = config.study_period or default_study_period(load.windows, catalog)
    summaries = summarize_outcomes(outcomes, catalog, study, config.annualize_threshold_days)
    report = aggregate(summaries, catalog, tariffs, config.min_customers)
    stats, behavior_rows = behavior_stats(
        load.windows, catalog, config.immediate_threshold, config.peak, study
    )
    data_quality = {
        "rows_read": load.rows_read,
        "rows_loaded": load.rows_loaded,
        "rows_rejected": len(load.rejects),
        "rejected_rows": [asdict(r) for r in load.rejects],
        "windows_loaded": len(load.windows),
        "windows_evaluated": len(outcomes),
        "windows_skipped": len(skipped),
        "skipped_windows": [{"window_id": w, "reason": r} for w, r in skipped],
        "reason_counts": dict(sorted(reasons.items())),
        "partial_moer_hours": {rid: int(h.partial.sum()) for rid, h in sorted(hourly.items())},
        "excluded_utilities": report.excluded_utilities,
    }
    result = PipelineResult(
        config, report, outcomes, summaries, stats, behavior_rows, evaluations, load.windows, load, data_quality
    )
    if write:
        result.files = write_reports(result)
    return result


def write_reports(result: PipelineResult) -> dict[str, Path]:
    cfg = result.config
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    keep = _scenario_key_filter(cfg.scenarios)
    summary = {
        "generated_at": cfg.generated_at,
        "config": cfg.to_dict(),
        "notes": NOTES,
        "fleet": result.report.to_dict(),
        "vehicles": [asdict(s) for s in result.summaries],
        "behavior": asdict(result.behavior),
        "data_quality": result.data_quality,
    }
    files = {
        "summary": out / "summary.json",
        "outcomes": out / "outcomes.csv",
        "vehicles": out / "vehicles.csv",
        "behavior": out / "behavior_windows.csv",
    }
    dump_json(files["summary"], _filter_keys(summary, keep))
    write_table(files["outcomes"], [c for c in OUTCOME_COLUMNS if keep(c)],
                (_outcome_row(o) for o in result.outcomes))
    write_table(files["vehicles"], [c for c in VEHICLE_COLUMNS if keep(c)],
                (_row(s) for s in result.summaries))
    write_table(files["behavior"], BEHAVIOR_COLUMNS, (_row(r) for r in result.behavior_rows))
    return files


def read_outcomes(path: str | Path) -> list[SessionOutcome]:
    def num(v: str) -> float | None:
        return float(v) if v != "" else None

    out = []
    for row in read_table(path):
        out.append(SessionOutcome(
            window_id=row["window_id"],
            vehicle_id=row["vehicle_id"],
            utility_id=row["utility_id"],
            plug_in=parse_timestamp(row["plug_in"]),
            plug_out=parse_timestamp(row["plug_out"]),
            demand_kwh=float(row["demand_kwh"]),
            baseline_cost=float(row["baseline_cost"]),
            baseline_emissions=float(row["baseline_emissions"]),
            **{
                f"{s}_{m}": num(row.get(f"{s}_{m}", ""))
                for s in SCENARIOS for m in ("cost", "emissions")
            },
        ))
    return out


def rereport(config: RunConfig, outcomes_path: str | Path) -> Path:
    """Re-aggregate an existing outcomes table without re-optimizing."""
    catalog = load_catalog(config.catalog)
    tariffs = load_tariffs(config.tariffs, catalog)
    outcomes = read_outcomes(outcomes_path)
    if not outcomes:
        raise EmptyValidSet({})
    study = config.study_period or default_study_period(outcomes, catalog)
    summaries = summarize_outcomes(outcomes, catalog, study, config.annualize_threshold_days)
    report = aggregate(summaries, catalog, tariffs, config.min_customers)
    present = [s for s in SCENARIOS if any(getattr(o, f"{s}_cost") is not None for o in outcomes)]
    keep = _scenario_key_filter(present)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = {
        "generated_at": config.generated_at,
        "config": config.to_dict(),
        "notes": NOTES,
        "source_outcomes": str(outcomes_path),
        "fleet": report.to_dict(),
        "vehicles": [asdict(s) for s in summaries],
    }
    path = out / "report.json"
    dump_json(path, _filter_keys(doc, keep))
    return path
