"""Residential rate schedules: timestamp -> price lookup and profile pricing."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from functools import cached_property
from typing import TYPE_CHECKING, Literal
from zoneinfo import ZoneInfo

import numpy as np

from smartcharge.errors import MissingTariffDefinition, TariffError

if TYPE_CHECKING:
    from smartcharge.domain import UtilityRef
    from smartcharge.optimizer import ChargingProfile

MINUTES_PER_DAY = 1440
DAY_SETS = ("weekdays", "weekends", "all")
# 2024 is a leap year, so enumerating it visits all 366 month-day pairs
_CALENDAR_YEAR = 2024


def parse_clock(text: str) -> int:
    """'HH:MM' -> minute of day; '24:00' is accepted as an end bound."""
    hh, mm = text.split(":")
    minute = int(hh) * 60 + int(mm)
    if not 0 <= minute <= MINUTES_PER_DAY or not 0 <= int(mm) < 60:
        raise ValueError(f"bad clock time {text!r}")
    return minute


def parse_month_day(text: str) -> tuple[int, int]:
    mm, dd = text.split("-")
    month, day = int(mm), int(dd)
    date(_CALENDAR_YEAR, month, day)  # range check
    return month, day


@dataclass(frozen=True)
class RatePeriod:
    label: str
    day_set: Literal["weekdays", "weekends", "all"]
    start_minute: int
    end_minute: int
    price: float

    def minutes(self) -> list[int]:
        """Minutes of the day covered; equal bounds mean the whole day."""
        s, e = self.start_minute % MINUTES_PER_DAY, self.end_minute % MINUTES_PER_DAY
        if s == e:
            return list(range(MINUTES_PER_DAY))
        if s < e:
            return list(range(s, e))
        return list(range(s, MINUTES_PER_DAY)) + list(range(0, e))

    def applies_to(self, weekend: bool) -> bool:
        if self.day_set == "all":
            return True
        return (self.day_set == "weekends") == weekend


@dataclass(frozen=True)
class Season:
    label: str
    start: tuple[int, int]
    end: tuple[int, int]
    periods: tuple[RatePeriod, ...]

    def contains(self, month: int, day: int) -> bool:
        md = (month, day)
        if self.start <= self.end:
            return self.start <= md <= self.end
        return md >= self.start or md <= self.end


@dataclass(frozen=True)
class TariffSchedule:
    """A flat or TOU residential tariff evaluated in its utility's local time.

    Construction checks that seasons partition the calendar and that every
    (season, weekday/weekend) pair is covered minute-by-minute exactly once.
    """

    tariff_id: str
    utility_id: str
    kind: Literal["flat", "tou"]
    is_ev_variant: bool
    seasons: tuple[Season, ...]
    timezone: str
    note: str = ""
    _day_cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        if self.kind not in ("flat", "tou"):
            raise TariffError(f"{self.tariff_id}: kind must be 'flat' or 'tou', got {self.kind!r}")
        if not self.seasons:
            raise TariffError(f"{self.tariff_id}: at least one season is required")
        self._check_season_partition()
        lookup: dict[tuple[int, bool], np.ndarray] = {}
        for si, season in enumerate(self.seasons):
            for weekend in (False, True):
                lookup[(si, weekend)] = self._minute_table(season, weekend)
        object.__setattr__(self, "_minute_prices", lookup)
        prices = {p.price for s in self.seasons for p in s.periods}
        if any(not (p >= 0 and np.isfinite(p)) for p in prices):
            raise TariffError(f"{self.tariff_id}: prices must be finite and >= 0")
        if (len(prices) == 1) != (self.kind == "flat"):
            raise TariffError(
                f"{self.tariff_id}: kind {self.kind!r} disagrees with {len(prices)} distinct price(s)"
            )

    def _check_season_partition(self) -> None:
        day = date(_CALENDAR_YEAR, 1, 1)
        while day.year == _CALENDAR_YEAR:
            hits = [s.label for s in self.seasons if s.contains(day.month, day.day)]
            if len(hits) != 1:
                raise TariffError(
                    f"{self.tariff_id}: {day.month:02d}-{day.day:02d} falls in {len(hits)} seasons {hits}"
                )
            day += timedelta(days=1)

    def _minute_table(self, season: Season, weekend: bool) -> np.ndarray:
        table = np.full(MINUTES_PER_DAY, np.nan)
        count = np.zeros(MINUTES_PER_DAY, dtype=int)
        for period in season.periods:
            if period.applies_to(weekend):
                idx = period.minutes()
                table[idx] = period.price
                count[idx] += 1
        bad = np.flatnonzero(count != 1)
        if bad.size:
            m = int(bad[0])
            kind = "uncovered" if count[m] == 0 else "covered more than once"
            raise TariffError(
                f"{self.tariff_id}: season {season.label!r} "
                f"{'weekend' if weekend else 'weekday'} minute {m // 60:02d}:{m % 60:02d} is {kind}"
            )
        return table

    @cached_property
    def zone(self) -> ZoneInfo:
        return ZoneInfo(self.timezone)

    def season_index(self, month: int, day: int) -> int:
        for i, season in enumerate(self.seasons):
            if season.contains(month, day):
                return i
        raise AssertionError("season partition was checked at construction")

    def _table_for(self, local_day: date) -> np.ndarray:
        si = self.season_index(local_day.month, local_day.day)
        return self._minute_prices[(si, local_day.weekday() >= 5)]

    def rate_at(self, t: datetime | float) -> float:
        """Price in USD/kWh at an instant (datetime or epoch seconds)."""
        if isinstance(t, datetime):
            local = t.astimezone(self.zone)
        else:
            local = datetime.fromtimestamp(t, tz=self.zone)
        table = self._table_for(local.date())
        return float(table[local.hour * 60 + local.minute])

    def day_pieces(self, local_day: date) -> tuple[np.ndarray, np.ndarray]:
        """Constant-price pieces of one local calendar day.

        Returns ``(edges, prices)`` with ``len(edges) == len(prices) + 1``; edges
        are epoch seconds from local midnight to the next local midnight.
        """
        cached = self._day_cache.get(local_day)
        if cached is not None:
            return cached
        zone = self.zone
        day_start = datetime(local_day.year, local_day.month, local_day.day, tzinfo=zone)
        nxt = local_day + timedelta(days=1)
        day_end = datetime(nxt.year, nxt.month, nxt.day, tzinfo=zone)
        t0, t1 = day_start.timestamp(), day_end.timestamp()

        table = self._table_for(local_day)
        change_minutes = np.flatnonzero(np.diff(table)) + 1
        candidates = {t0, t1}
        for m in change_minutes:
            wall = datetime(local_day.year, local_day.month, local_day.day, int(m) // 60, int(m) % 60)
            for fold in (0, 1):
                candidates.add(wall.replace(tzinfo=zone, fold=fold).timestamp())
        if day_start.utcoffset() != day_end.utcoffset():
            # DST day: wall-clock jumps happen on whole UTC hours
            h = np.ceil(t0 / 3600.0) * 3600.0
            while h < t1:
                candidates.add(float(h))
                h += 3600.0
        edges = np.array(sorted(c for c in candidates if t0 <= c <= t1))
        mids = 0.5 * (edges[:-1] + edges[1:])
        prices = np.array([self.rate_at(float(m)) for m in mids])
        keep = np.concatenate(([True], prices[1:] != prices[:-1]))
        prices = prices[keep]
        edges = np.concatenate((edges[:-1][keep], edges[-1:]))
        result = (edges, prices)
        self._day_cache[local_day] = result
        return result

    def pieces(self, t0: float, t1: float) -> tuple[np.ndarray, np.ndarray]:
        """Constant-price pieces covering ``[t0, t1]`` (epoch seconds), clipped to it."""
        zone = self.zone
        first = datetime.fromtimestamp(t0, tz=zone).date()
        last = datetime.fromtimestamp(t1, tz=zone).date()
        if first == last:
            edges, prices = self.day_pieces(first)
        else:
            edge_parts, price_parts = [], []
            day = first
            while day <= last:
                e, p = self.day_pieces(day)
                edge_parts.append(e[:-1])
                price_parts.append(p)
                day += timedelta(days=1)
            edge_parts.append(e[-1:])
            edges = np.concatenate(edge_parts)
            prices = np.concatenate(price_parts)
        lo = max(int(np.searchsorted(edges, t0, side="right")) - 1, 0)
        hi = int(np.searchsorted(edges, t1, side="left"))
        edges = edges[lo : hi + 1].copy()
        prices = prices[lo:hi]
        edges[0], edges[-1] = t0, t1
        return edges, prices

    def change_points(self, t0: float, t1: float) -> np.ndarray:
        """Interior instants in ``(t0, t1)`` where the price may change."""
        edges, _ = self.pieces(t0, t1)
        return edges[1:-1]


def cost_of(profile: ChargingProfile, tariff: TariffSchedule) -> float:
    """USD cost of a profile: each segment is split at price changes and billed at the piece price."""
    if not profile.segments:
        return 0.0
    seg = np.array([(s.start, s.end, s.power_kw) for s in profile.segments])
    edges, prices = tariff.pieces(float(seg[:, 0].min()), float(seg[:, 1].max()))
    # cumulative USD per kW is piecewise linear in time
    cum = np.concatenate(([0.0], np.cumsum(np.diff(edges) / 3600.0 * prices)))
    at = lambda t: np.interp(t, edges, cum)
    return float(np.dot(seg[:, 2], at(seg[:, 1]) - at(seg[:, 0])))


def billing_tariff(
    utility: UtilityRef,
    scenario: Literal["baseline", "optimized"],
    tariffs: dict[str, TariffSchedule],
) -> TariffSchedule:
    """Baseline bills on the standard tariff; optimized bills on the EV tariff when offered."""
    if scenario not in ("baseline", "optimized"):
        raise ValueError(f"unknown scenario {scenario!r}")
    tariff_id = utility.standard_tariff_id
    if scenario == "optimized" and utility.ev_tariff_id:
        tariff_id = utility.ev_tariff_id
    try:
        return tariffs[tariff_id]
    except KeyError:
        raise MissingTariffDefinition(tariff_id) from None


def flat_tariff(tariff_id: str, utility_id: str, price: float, tz: str = "UTC", **kw) -> TariffSchedule:
    period = RatePeriod("all-day", "all", 0, 0, price)
    season = Season("year", (1, 1), (12, 31), (period,))
    return TariffSchedule(tariff_id, utility_id, "flat", kw.pop("is_ev_variant", False), (season,), tz, **kw)
