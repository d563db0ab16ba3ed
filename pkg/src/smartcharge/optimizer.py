"""Lexicographic (cost, then emissions) charging schedules over discretized time slots."""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import overload

import numpy as np

from smartcharge import kernels
from smartcharge.domain import ChargingInterval, PlugInWindow, local_midnight
from smartcharge.errors import InfeasibleDemand, TooManySlots
from smartcharge.moer import HOUR, HourlyMoer
from smartcharge.tariff import TariffSchedule

DEFAULT_SLOT_LEN = 900
ORACLE_MAX_SLOTS = 12
_FEAS_TOL = 1e-9
_TIE_RTOL = 1e-12


def _seconds(slot_len: int | float | timedelta) -> float:
    if isinstance(slot_len, timedelta):
        return slot_len.total_seconds()
    return float(slot_len)


@dataclass(frozen=True)
class Segment:
    start: float
    end: float
    power_kw: float

    @property
    def energy_kwh(self) -> float:
        return self.power_kw * (self.end - self.start) / HOUR

    @property
    def start_dt(self) -> datetime:
        return datetime.fromtimestamp(self.start, tz=timezone.utc)

    @property
    def end_dt(self) -> datetime:
        return datetime.fromtimestamp(self.end, tz=timezone.utc)


@dataclass(frozen=True)
class ChargingProfile:
    """Piecewise-constant power schedule; segment bounds are epoch seconds."""

    segments: tuple[Segment, ...] = ()

    @property
    def total_energy_kwh(self) -> float:
        return sum(s.energy_kwh for s in self.segments)

    @classmethod
    def from_intervals(cls, intervals: Iterable[ChargingInterval]) -> ChargingProfile:
        return cls(tuple(
            Segment(iv.start.timestamp(), iv.end.timestamp(), iv.mean_power_kw) for iv in intervals
        ))

    def energy_between(self, t0: float, t1: float) -> float:
        total = 0.0
        for s in self.segments:
            lo, hi = max(s.start, t0), min(s.end, t1)
            if hi > lo:
                total += s.power_kw * (hi - lo) / HOUR
        return total


@dataclass(frozen=True)
class Slot:
    start: float
    end: float
    price: float
    moer: float
    capacity_kwh: float

    @property
    def hours(self) -> float:
        return (self.end - self.start) / HOUR

    @property
    def power_kw(self) -> float:
        return self.capacity_kwh / self.hours


class SlotSet(Sequence[Slot]):
    """Column-oriented slots, contiguous in time; indexing yields :class:`Slot`."""

    def __init__(self, start, end, price, moer, capacity) -> None:
        self.start = np.ascontiguousarray(start, dtype=float)
        self.end = np.ascontiguousarray(end, dtype=float)
        self.price = np.ascontiguousarray(price, dtype=float)
        self.moer = np.ascontiguousarray(moer, dtype=float)
        self.capacity = np.ascontiguousarray(capacity, dtype=float)

    @classmethod
    def from_slots(cls, slots: Iterable[Slot]) -> SlotSet:
        slots = list(slots)
        cols = [[getattr(s, f) for s in slots] for f in ("start", "end", "price", "moer", "capacity_kwh")]
        return cls(*cols)

    def __len__(self) -> int:
        return self.start.shape[0]

    @overload
    def __getitem__(self, i: int) -> Slot: ...
    @overload
    def __getitem__(self, i: slice) -> SlotSet: ...

    def __getitem__(self, i):
        if isinstance(i, slice):
            return SlotSet(self.start[i], self.end[i], self.price[i], self.moer[i], self.capacity[i])
        return Slot(float(self.start[i]), float(self.end[i]), float(self.price[i]),
                    float(self.moer[i]), float(self.capacity[i]))

    def __iter__(self) -> Iterator[Slot]:
        return (self[i] for i in range(len(self)))

    @property
    def total_capacity(self) -> float:
        return float(self.capacity.sum())

    def objective(self, alloc: np.ndarray) -> tuple[float, float]:
        """(USD, kg CO2e) of a per-slot energy allocation."""
        return float(alloc @ self.price), float(alloc @ self.moer) / 1000.0


def _as_slotset(slots: SlotSet | Sequence[Slot]) -> SlotSet:
    return slots if isinstance(slots, SlotSet) else SlotSet.from_slots(slots)


def build_slots(
    region: tuple[float, float] | tuple[datetime, datetime],
    rated_power_kw: float,
    tariff: TariffSchedule,
    hourly: HourlyMoer,
    slot_len: int | float | timedelta = DEFAULT_SLOT_LEN,
) -> SlotSet:
    """Cut a region at slot grid lines, tariff price changes and clock hours.

    Grid lines are multiples of ``slot_len`` since the epoch, so with a slot
    length dividing one hour every clock hour is a cut as well.
    """
    t0, t1 = (r.timestamp() if isinstance(r, datetime) else float(r) for r in region)
    step = _seconds(slot_len)
    if not (0 < step <= HOUR and HOUR % step == 0):
        raise ValueError(f"slot length {step}s must divide one hour")
    if not t0 < t1:
        raise ValueError("slot region must be non-empty")
    p_edges, p_prices = tariff.pieces(t0, t1)
    edges = kernels.build_cuts(t0, t1, step, np.ascontiguousarray(p_edges[1:-1]))
    start, end = edges[:-1], edges[1:]
    mids = 0.5 * (start + end)
    price = p_prices[np.searchsorted(p_edges, mids, side="right") - 1]
    moer = hourly.lookup(np.floor(mids / HOUR) * HOUR)
    capacity = rated_power_kw * (end - start) / HOUR
    return SlotSet(start, end, price, moer, capacity)


def profile_from_allocation(slots: SlotSet, alloc: np.ndarray) -> ChargingProfile:
    """Each used slot charges at its full power from its start; adjacent equal-power runs merge."""
    used = np.flatnonzero(alloc > 0)
    if not used.size:
        return ChargingProfile()
    s, e, cap = slots.start[used], slots.end[used], slots.capacity[used]
    power = cap * HOUR / (e - s)
    a = alloc[used]
    e = np.where(a < cap, s + a / power * HOUR, e)
    # a round-off residue can leave a fill too small to move the end time
    keep = e > s
    if not keep.all():
        used, s, e, power = used[keep], s[keep], e[keep], power[keep]
        if not used.size:
            return ChargingProfile()
    # a run continues when a slot starts exactly where the previous one ended, at the same power
    new_run = np.ones(used.size, dtype=bool)
    new_run[1:] = (s[1:] != e[:-1]) | (power[1:] != power[:-1])
    starts = np.flatnonzero(new_run)
    ends = np.append(starts[1:], used.size) - 1
    s, e, power = s[starts].tolist(), e[ends].tolist(), power[starts].tolist()
    return ChargingProfile(tuple(map(Segment, s, e, power)))


def optimize_allocation(demand_kwh: float, slots: SlotSet | Sequence[Slot]) -> tuple[SlotSet, np.ndarray]:
    slots = _as_slotset(slots)
    total = slots.total_capacity
    if demand_kwh > total + _FEAS_TOL * max(1.0, total):
        raise InfeasibleDemand(demand_kwh, total)
    demand = min(demand_kwh, total)
    alloc = kernels.greedy_fill(slots.price, slots.moer, slots.start, slots.capacity, demand)
    return slots, alloc


def optimize(demand_kwh: float, slots: SlotSet | Sequence[Slot]) -> ChargingProfile:
    """Cheapest schedule delivering ``demand_kwh``; ties on cost go to lower MOER, then earlier start."""
    slots, alloc = optimize_allocation(demand_kwh, slots)
    return profile_from_allocation(slots, alloc)


def constrained_region(window: PlugInWindow) -> tuple[float, float]:
    return window.span


def unconstrained_region(windows: Sequence[PlugInWindow], tariff: TariffSchedule) -> tuple[float, float]:
    """Union of the local calendar days touched by the windows' plugged-in time."""
    zone = tariff.zone
    first = min(w.span[0] for w in windows)
    last = max(w.span[1] for w in windows)
    start = local_midnight(datetime.fromtimestamp(first, tz=timezone.utc), zone)
    # plug_out is an exclusive bound: unplugging at midnight does not claim the next day
    end = local_midnight(datetime.fromtimestamp(last - 1e-6, tz=timezone.utc), zone, day_offset=1)
    return start.timestamp(), end.timestamp()


def optimize_constrained(
    window: PlugInWindow,
    tariff: TariffSchedule,
    hourly: HourlyMoer,
    slot_len: int | float | timedelta = DEFAULT_SLOT_LEN,
) -> ChargingProfile:
    slots = build_slots(window.span, window.rated_power_kw, tariff, hourly, slot_len)
    return optimize(window.demand_kwh, slots)


def optimize_unconstrained(
    windows: PlugInWindow | Sequence[PlugInWindow],
    tariff: TariffSchedule,
    hourly: HourlyMoer,
    slot_len: int | float | timedelta = DEFAULT_SLOT_LEN,
) -> ChargingProfile:
    """Optimize the combined demand of one vehicle's windows over their local day(s).

    Power is capped at the largest rated power among the windows.
    """
    if isinstance(windows, PlugInWindow):
        windows = [windows]
    region = unconstrained_region(windows, tariff)
    rated = max(w.rated_power_kw for w in windows)
    slots = build_slots(region, rated, tariff, hourly, slot_len)
    return optimize(sum(w.demand_kwh for w in windows), slots)


def oracle_allocation(demand_kwh: float, slots: SlotSet | Sequence[Slot], tol: float = 1e-9) -> np.ndarray:
    """Exhaustive lexicographic optimum over 'full subset + one fractional slot' allocations.

    Every vertex of the feasible polytope has at most one fractional slot, so
    enumerating them yields the exact optimum. Exponential; tests only.
    """
    slots = _as_slotset(slots)
    n = len(slots)
    if n > ORACLE_MAX_SLOTS:
        raise TooManySlots(f"oracle handles at most {ORACLE_MAX_SLOTS} slots, got {n}")
    total = slots.total_capacity
    if demand_kwh > total + tol * max(1.0, total):
        raise InfeasibleDemand(demand_kwh, total)
    if demand_kwh <= 0:
        return np.zeros(n)

    cap, price, moer = slots.capacity, slots.price, slots.moer
    masks = ((np.arange(2**n)[:, None] >> np.arange(n)) & 1).astype(bool)
    cap_s = masks @ cap
    cost_s = masks @ (cap * price)
    em_s = masks @ (cap * moer)
    resid = demand_kwh - cap_s

    # candidate (subset, fractional slot); column n means "no fractional slot"
    cost = np.full((masks.shape[0], n + 1), np.inf)
    em = np.full_like(cost, np.inf)
    ok = (~masks) & (resid[:, None] > 0) & (resid[:, None] <= cap[None, :] * (1 + tol))
    cost[:, :n] = np.where(ok, cost_s[:, None] + resid[:, None] * price[None, :], np.inf)
    em[:, :n] = np.where(ok, em_s[:, None] + resid[:, None] * moer[None, :], np.inf)
    exact = np.abs(resid) <= tol * max(1.0, demand_kwh)
    cost[:, n] = np.where(exact, cost_s, np.inf)
    em[:, n] = np.where(exact, em_s, np.inf)

    # cost ties are decided at round-off scale; a looser tolerance would trade real cost for emissions
    best_cost = cost.min()
    near = cost <= best_cost + _TIE_RTOL * max(1.0, abs(best_cost))
    em_near = np.where(near, em, np.inf)
    si, fi = np.unravel_index(np.argmin(em_near), em_near.shape)
    alloc = np.where(masks[si], cap, 0.0)
    if fi < n:
        alloc[fi] = min(resid[si], cap[fi])
    return alloc


def oracle_optimize(demand_kwh: float, slots: SlotSet | Sequence[Slot]) -> ChargingProfile:
    slots = _as_slotset(slots)
    return profile_from_allocation(slots, oracle_allocation(demand_kwh, slots))


def allocation_of(profile: ChargingProfile, slots: SlotSet) -> np.ndarray:
    """Energy the profile delivers inside each slot."""
    return np.array([profile.energy_between(s, e) for s, e in zip(slots.start, slots.end)])
