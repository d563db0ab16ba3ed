"""Baseline accounting, per-window outcomes, savings aggregation and charging-behavior statistics."""

from __future__ import annotations

import statistics
from collections import defaultdict
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta
from typing import Literal

import numpy as np

from smartcharge.domain import Catalog, PlugInWindow, local_midnight
from smartcharge.errors import EmptyOutcomeList, ZeroBaseline
from smartcharge.moer import HourlyMoer, emissions_of
from smartcharge.optimizer import (
    DEFAULT_SLOT_LEN,
    ChargingProfile,
    build_slots,
    optimize_allocation,
    profile_from_allocation,
    unconstrained_region,
)
from smartcharge.tariff import TariffSchedule, billing_tariff, cost_of

Scenario = Literal["constrained", "unconstrained"]
SCENARIOS: tuple[Scenario, ...] = ("constrained", "unconstrained")
COST_TOL = 1e-9
QUANTILES = (0.1, 0.25, 0.5, 0.75, 0.9)
DAY = 86400.0


@dataclass(frozen=True)
class SessionOutcome:
    window_id: str
    vehicle_id: str
    utility_id: str
    plug_in: datetime
    plug_out: datetime
    demand_kwh: float
    baseline_cost: float
    baseline_emissions: float
    constrained_cost: float | None = None
    constrained_emissions: float | None = None
    unconstrained_cost: float | None = None
    unconstrained_emissions: float | None = None

    @property
    def cost_increased(self) -> bool | None:
        if self.constrained_cost is None:
            return None
        return self.constrained_cost > self.baseline_cost + COST_TOL


@dataclass
class VehicleEvaluation:
    """Everything computed for one vehicle: outcomes, the profiles behind them, and skips."""

    outcomes: list[SessionOutcome] = field(default_factory=list)
    baseline_profiles: dict[str, ChargingProfile] = field(default_factory=dict)
    constrained_profiles: dict[str, ChargingProfile] = field(default_factory=dict)
    # (window ids, region, rated power, profile) per jointly optimized day group
    unconstrained_groups: list[tuple[tuple[str, ...], tuple[float, float], float, ChargingProfile]] = field(
        default_factory=list
    )
    skipped: list[tuple[str, str]] = field(default_factory=list)


def percent_reduction(baseline: float, optimized: float) -> float:
    """100 * (baseline - optimized) / baseline; negative when the optimized value is worse."""
    if baseline == 0:
        raise ZeroBaseline("percent reduction is undefined for a zero baseline")
    return 100.0 * (baseline - optimized) / baseline


def baseline_accounting(
    window: PlugInWindow,
    catalog: Catalog,
    tariffs: Mapping[str, TariffSchedule],
    hourly: HourlyMoer,
) -> tuple[float, float]:
    """Cost on the standard tariff and emissions of the observed charging."""
    profile = ChargingProfile.from_intervals(window.intervals)
    tariff = billing_tariff(catalog.utility(window.utility_id), "baseline", tariffs)
    return cost_of(profile, tariff), emissions_of(profile, hourly)


def _split_by_share(total: float, parts: Sequence[float], weights: Sequence[float]) -> list[float]:
    """Attribute a joint total to members in proportion to their stand-alone values."""
    base = sum(parts)
    if base > 0:
        return [total * p / base for p in parts]
    wsum = sum(weights)
    return [total * w / wsum for w in weights]


def _day_groups(windows: Sequence[PlugInWindow], tariff: TariffSchedule) -> list[list[PlugInWindow]]:
    groups: list[list[PlugInWindow]] = []
    end = -np.inf
    for w in windows:
        lo, hi = unconstrained_region([w], tariff)
        if groups and lo < end:
            groups[-1].append(w)
            end = max(end, hi)
        else:
            groups.append([w])
            end = hi
    return groups


def evaluate_vehicle(
    windows: Sequence[PlugInWindow],
    catalog: Catalog,
    tariffs: Mapping[str, TariffSchedule],
    hourly_by_region: Mapping[str, HourlyMoer],
    slot_len: float = DEFAULT_SLOT_LEN,
    scenarios: Iterable[Scenario] = SCENARIOS,
) -> VehicleEvaluation:
    """Baseline and optimized outcomes for all validated windows of one vehicle.

    Windows lacking MOER data (over the plug-in window, or over its local
    day(s) when the unconstrained scenario runs) are skipped, as are windows
    overlapping an earlier window of the same vehicle.
    """
    scenarios = tuple(scenarios)
    result = VehicleEvaluation()
    kept: list[PlugInWindow] = []
    last_out = None
    for w in sorted(windows, key=lambda w: (w.span[0], w.window_id)):
        utility = catalog.utility(w.utility_id)
        hourly = hourly_by_region.get(w.region_id)
        opt_tariff = billing_tariff(utility, "optimized", tariffs)
        if last_out is not None and w.span[0] < last_out:
            result.skipped.append((w.window_id, "OverlappingWindows"))
            continue
        need = [w.span]
        if "unconstrained" in scenarios:
            need.append(unconstrained_region([w], opt_tariff))
        if hourly is None or not all(hourly.covers(*r) for r in need):
            result.skipped.append((w.window_id, "MoerCoverageGap"))
            continue
        kept.append(w)
        last_out = w.span[1]

    rows: dict[str, dict] = {}
    for w in kept:
        utility = catalog.utility(w.utility_id)
        hourly = hourly_by_region[w.region_id]
        base_profile = ChargingProfile.from_intervals(w.intervals)
        base_tariff = billing_tariff(utility, "baseline", tariffs)
        result.baseline_profiles[w.window_id] = base_profile
        row = dict(
            window_id=w.window_id, vehicle_id=w.vehicle_id, utility_id=w.utility_id,
            plug_in=w.plug_in, plug_out=w.plug_out, demand_kwh=w.demand_kwh,
            baseline_cost=cost_of(base_profile, base_tariff),
            baseline_emissions=emissions_of(base_profile, hourly),
        )
        opt_tariff = billing_tariff(utility, "optimized", tariffs)
        slots = build_slots(w.span, w.rated_power_kw, opt_tariff, hourly, slot_len)
        slots, alloc = optimize_allocation(w.demand_kwh, slots)
        result.constrained_profiles[w.window_id] = profile_from_allocation(slots, alloc)
        # slots are cut at every price change and clock hour, so the slot objective is exact
        row["constrained_cost"], row["constrained_emissions"] = slots.objective(alloc)
        rows[w.window_id] = row

    if "unconstrained" in scenarios and kept:
        # one utility and region per vehicle is the common case; group per (utility, region)
        by_key: dict[tuple[str, str], list[PlugInWindow]] = defaultdict(list)
        for w in kept:
            by_key[(w.utility_id, w.region_id)].append(w)
        for (utility_id, region_id), ws in sorted(by_key.items()):
            opt_tariff = billing_tariff(catalog.utility(utility_id), "optimized", tariffs)
            hourly = hourly_by_region[region_id]
            for group in _day_groups(ws, opt_tariff):
                region = unconstrained_region(group, opt_tariff)
                rated = max(w.rated_power_kw for w in group)
                slots = build_slots(region, rated, opt_tariff, hourly, slot_len)
                slots, alloc = optimize_allocation(sum(w.demand_kwh for w in group), slots)
                profile = profile_from_allocation(slots, alloc)
                ids = tuple(w.window_id for w in group)
                result.unconstrained_groups.append((ids, region, rated, profile))
                joint_cost, joint_em = slots.objective(alloc)
                demands = [w.demand_kwh for w in group]
                costs = _split_by_share(joint_cost, [rows[i]["constrained_cost"] for i in ids], demands)
                ems = _split_by_share(joint_em, [rows[i]["constrained_emissions"] for i in ids], demands)
                for i, c, e in zip(ids, costs, ems):
                    rows[i]["unconstrained_cost"] = c
                    rows[i]["unconstrained_emissions"] = e

    for w in kept:
        row = rows[w.window_id]
        if "constrained" not in scenarios:
            row.pop("constrained_cost")
            row.pop("constrained_emissions")
        result.outcomes.append(SessionOutcome(**row))
    return result


# ---------------------------------------------------------------- summaries


@dataclass(frozen=True)
class VehicleSummary:
    vehicle_id: str
    utility_id: str
    sessions: int
    days_observed: float
    partial: bool
    demand_kwh: float
    baseline_cost: float
    baseline_emissions: float
    cost_increased_sessions: int = 0
    constrained_cost: float | None = None
    constrained_emissions: float | None = None
    unconstrained_cost: float | None = None
    unconstrained_emissions: float | None = None
    pct_cost_reduction_constrained: float | None = None
    pct_cost_reduction_unconstrained: float | None = None
    pct_emissions_reduction_constrained: float | None = None
    pct_emissions_reduction_unconstrained: float | None = None
    annual_cost_savings_constrained: float | None = None
    annual_cost_savings_unconstrained: float | None = None
    annual_emissions_reduction_constrained: float | None = None
    annual_emissions_reduction_unconstrained: float | None = None


def _pct_or_none(baseline: float, optimized: float | None) -> float | None:
    if optimized is None or baseline == 0:
        return None
    return percent_reduction(baseline, optimized)


def summarize_vehicle(
    outcomes: Sequence[SessionOutcome],
    days_observed: float,
    annualize_threshold_days: float = 90,
) -> VehicleSummary:
    """Totals over a vehicle's windows, percent reductions of those totals, and annualized savings."""
    if not outcomes:
        raise EmptyOutcomeList("cannot summarize a vehicle without outcomes")
    vehicle_ids = {o.vehicle_id for o in outcomes}
    if len(vehicle_ids) != 1:
        raise ValueError(f"outcomes span several vehicles: {sorted(vehicle_ids)}")

    def total(name: str) -> float | None:
        values = [getattr(o, name) for o in outcomes]
        return None if any(v is None for v in values) else float(sum(values))

    partial = days_observed < annualize_threshold_days
    scale = None if partial else 365.0 / days_observed
    base_cost, base_em = total("baseline_cost"), total("baseline_emissions")
    fields = dict(
        vehicle_id=outcomes[0].vehicle_id,
        utility_id=outcomes[0].utility_id,
        sessions=len(outcomes),
        days_observed=float(days_observed),
        partial=partial,
        demand_kwh=total("demand_kwh"),
        baseline_cost=base_cost,
        baseline_emissions=base_em,
        cost_increased_sessions=sum(bool(o.cost_increased) for o in outcomes),
    )
    for scen in SCENARIOS:
        cost, em = total(f"{scen}_cost"), total(f"{scen}_emissions")
        fields[f"{scen}_cost"] = cost
        fields[f"{scen}_emissions"] = em
        fields[f"pct_cost_reduction_{scen}"] = _pct_or_none(base_cost, cost)
        fields[f"pct_emissions_reduction_{scen}"] = _pct_or_none(base_em, em)
        if scale is not None and cost is not None:
            fields[f"annual_cost_savings_{scen}"] = (base_cost - cost) * scale
            fields[f"annual_emissions_reduction_{scen}"] = (base_em - em) * scale
    return VehicleSummary(**fields)


@dataclass(frozen=True)
class Distribution:
    n: int
    mean: float
    median: float
    quantiles: dict[str, float]

    @classmethod
    def of(cls, values: Iterable[float | None]) -> Distribution | None:
        vals = [v for v in values if v is not None]
        if not vals:
            return None
        arr = np.asarray(vals, dtype=float)
        qs = {f"q{int(q * 100):02d}": float(np.quantile(arr, q)) for q in QUANTILES}
        return cls(len(vals), float(arr.mean()), float(statistics.median(vals)), qs)


@dataclass(frozen=True)
class GroupSummary:
    """Per-vehicle distributions for a set of vehicles (a utility, or a TOU/flat split)."""

    key: str
    vehicle_count: int
    has_tou: bool
    metrics: dict[str, Distribution]
    # ratio-of-sums percent reductions over the whole group
    totals_pct: dict[str, float]


@dataclass(frozen=True)
class FleetReport:
    splits: dict[str, GroupSummary]
    utilities: list[GroupSummary]
    excluded_utilities: dict[str, int]
    vehicle_count: int

    def to_dict(self) -> dict:
        return asdict(self)


_COST_METRICS = ("pct_cost_reduction", "annual_cost_savings")
_EMISSION_METRICS = ("pct_emissions_reduction", "annual_emissions_reduction")


def _group_summary(key: str, vehicles: Sequence[VehicleSummary], has_tou: bool) -> GroupSummary:
    metrics: dict[str, Distribution] = {}
    totals: dict[str, float] = {}
    names = (_COST_METRICS if has_tou else ()) + _EMISSION_METRICS
    for scen in SCENARIOS:
        for base in names:
            name = f"{base}_{scen}"
            dist = Distribution.of(getattr(v, name) for v in vehicles)
            if dist is not None:
                metrics[name] = dist
        pairs = [("cost", "baseline_cost")] if has_tou else []
        pairs.append(("emissions", "baseline_emissions"))
        for what, base_field in pairs:
            opt = [getattr(v, f"{scen}_{what}") for v in vehicles]
            if vehicles and all(o is not None for o in opt):
                base_total = sum(getattr(v, base_field) for v in vehicles)
                if base_total > 0:
                    totals[f"pct_{what}_reduction_{scen}"] = percent_reduction(base_total, sum(opt))
    return GroupSummary(key, len(vehicles), has_tou, metrics, totals)


def utility_has_tou(utility_id: str, catalog: Catalog, tariffs: Mapping[str, TariffSchedule]) -> bool:
    return billing_tariff(catalog.utility(utility_id), "optimized", tariffs).kind == "tou"


def aggregate(
    summaries: Sequence[VehicleSummary],
    catalog: Catalog,
    tariffs: Mapping[str, TariffSchedule],
    min_customers: int = 100,
) -> FleetReport:
    """Split vehicles by whether their optimized billing tariff is TOU and summarize each split and utility.

    Utilities with fewer than ``min_customers`` vehicles are dropped before
    any statistic is computed. Cost metrics appear only for TOU groups.
    """
    by_utility: dict[str, list[VehicleSummary]] = defaultdict(list)
    for s in sorted(summaries, key=lambda s: s.vehicle_id):
        by_utility[s.utility_id].append(s)
    excluded = {u: len(vs) for u, vs in sorted(by_utility.items()) if len(vs) < min_customers}
    included = {u: vs for u, vs in sorted(by_utility.items()) if u not in excluded}

    utilities = [
        _group_summary(u, vs, utility_has_tou(u, catalog, tariffs)) for u, vs in included.items()
    ]
    split_members: dict[str, list[VehicleSummary]] = {"tou": [], "flat": []}
    for u, vs in included.items():
        split_members["tou" if utility_has_tou(u, catalog, tariffs) else "flat"].extend(vs)
    splits = {
        name: _group_summary(name, sorted(vs, key=lambda s: s.vehicle_id), name == "tou")
        for name, vs in split_members.items()
    }
    return FleetReport(splits, utilities, excluded, sum(len(v) for v in included.values()))


# ---------------------------------------------------------------- behavior


@dataclass(frozen=True)
class WindowBehavior:
    window_id: str
    vehicle_id: str
    utility_id: str
    plug_in_local_hour: int
    plug_hours: float
    charging_hours: float
    utilization: float
    start_delay_minutes: float
    immediate_start: bool
    intervals: int
    peak_interval_starts: int
    energy_kwh: float


@dataclass(frozen=True)
class BehaviorStats:
    windows: int
    charging_intervals: int
    immediate_start_share: float
    peak_start_share: float
    plugin_duration_hours: dict[str, float]
    charging_utilization: dict[str, float]
    sessions_per_vehicle: dict[str, float]
    daily_energy_per_vehicle_kwh: dict[str, float]


def _mean_median(values: Sequence[float]) -> dict[str, float]:
    if not values:
        return {"mean": float("nan"), "median": float("nan")}
    return {"mean": float(np.mean(values)), "median": float(statistics.median(values))}


def observed_days(
    plug_ins: Sequence[datetime],
    study_period: tuple[datetime, datetime],
    zone,
) -> float:
    """Days from the later of study start and the vehicle's first local plug-in day to study end."""
    first = local_midnight(min(plug_ins, key=lambda t: t.timestamp()), zone).timestamp()
    start = max(study_period[0].timestamp(), first)
    return max((study_period[1].timestamp() - start) / DAY, 0.0)


def window_behavior(
    window: PlugInWindow,
    zone,
    immediate_threshold: timedelta = timedelta(minutes=15),
    peak: tuple[int, int] = (16 * 60, 21 * 60),
) -> WindowBehavior:
    charging = sum(iv.hours for iv in window.intervals)
    first = window.intervals[0]
    delay = timedelta(seconds=first.start.timestamp() - window.plug_in.timestamp())
    peak_starts = 0
    for iv in window.intervals:
        local = iv.start.astimezone(zone)
        minute = local.hour * 60 + local.minute
        if peak[0] <= minute < peak[1]:
            peak_starts += 1
    return WindowBehavior(
        window_id=window.window_id,
        vehicle_id=window.vehicle_id,
        utility_id=window.utility_id,
        plug_in_local_hour=window.plug_in.astimezone(zone).hour,
        plug_hours=window.hours,
        charging_hours=charging,
        utilization=charging / window.hours,
        start_delay_minutes=delay.total_seconds() / 60.0,
        immediate_start=delay <= immediate_threshold,
        intervals=len(window.intervals),
        peak_interval_starts=peak_starts,
        energy_kwh=window.demand_kwh,
    )


def behavior_stats(
    windows: Sequence[PlugInWindow],
    catalog: Catalog,
    immediate_threshold: timedelta = timedelta(minutes=15),
    peak: tuple[int, int] = (16 * 60, 21 * 60),
    study_period: tuple[datetime, datetime] | None = None,
) -> tuple[BehaviorStats, list[WindowBehavior]]:
    """Fleet charging-behavior statistics plus the per-window rows they are computed from.

    Peak membership uses the local wall clock, start-inclusive and end-exclusive.
    """
    rows = [
        window_behavior(w, catalog.utility(w.utility_id).zone, immediate_threshold, peak)
        for w in sorted(windows, key=lambda w: w.window_id)
    ]
    n_intervals = sum(r.intervals for r in rows)
    if study_period is None and windows:
        study_period = default_study_period(windows, catalog)

    per_vehicle: dict[str, list[PlugInWindow]] = defaultdict(list)
    for w in windows:
        per_vehicle[w.vehicle_id].append(w)
    sessions, daily = [], []
    for vid in sorted(per_vehicle):
        ws = per_vehicle[vid]
        sessions.append(len(ws))
        days = observed_days([w.plug_in for w in ws], study_period, catalog.utility(ws[0].utility_id).zone)
        if days > 0:
            daily.append(sum(w.demand_kwh for w in ws) / days)

    stats = BehaviorStats(
        windows=len(rows),
        charging_intervals=n_intervals,
        immediate_start_share=(sum(r.immediate_start for r in rows) / len(rows)) if rows else float("nan"),
        peak_start_share=(sum(r.peak_interval_starts for r in rows) / n_intervals) if n_intervals else float("nan"),
        plugin_duration_hours=_mean_median([r.plug_hours for r in rows]),
        charging_utilization=_mean_median([r.utilization for r in rows]),
        sessions_per_vehicle=_mean_median(sessions),
        daily_energy_per_vehicle_kwh=_mean_median(daily),
    )
    return stats, rows


def default_study_period(windows: Sequence, catalog: Catalog) -> tuple[datetime, datetime]:
    """Fleet-wide span: earliest local plug-in midnight to the latest plug-out.

    Accepts anything with ``utility_id``, ``plug_in`` and ``plug_out`` (windows or outcomes).
    """
    starts = [local_midnight(w.plug_in, catalog.utility(w.utility_id).zone) for w in windows]
    key = datetime.timestamp
    return min(starts, key=key), max((w.plug_out for w in windows), key=key)
