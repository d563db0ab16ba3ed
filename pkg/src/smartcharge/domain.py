"""Core value types: timestamps, charging intervals, plug-in windows and the catalog."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from functools import cached_property
from zoneinfo import ZoneInfo

from smartcharge.errors import (
    IntervalOutsideWindow,
    InvalidWindow,
    NonPositiveEnergy,
    OverlappingIntervals,
    PowerExceedsRating,
    UnknownRegion,
    UnknownUtility,
)

SECONDS_PER_HOUR = 3600.0
RATING_RTOL = 1e-9


def parse_timestamp(text: str) -> datetime:
    """Parse an RFC 3339 timestamp; an explicit UTC offset is mandatory."""
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    value = datetime.fromisoformat(text)
    if value.tzinfo is None or value.utcoffset() is None:
        raise ValueError(f"timestamp {text!r} has no UTC offset")
    return value


def format_timestamp(value: datetime) -> str:
    if value.tzinfo is None:
        raise ValueError("naive datetimes cannot be serialized")
    spec = "seconds" if value.microsecond == 0 else "microseconds"
    return value.isoformat(timespec=spec)


def to_epoch(value: datetime) -> float:
    return value.timestamp()


def from_epoch(seconds: float, tz: timezone | ZoneInfo = timezone.utc) -> datetime:
    return datetime.fromtimestamp(seconds, tz=tz)


def hours_between(start: datetime, end: datetime) -> float:
    # timestamps, not subtraction: aware datetimes sharing a ZoneInfo subtract in wall-clock time
    return (end.timestamp() - start.timestamp()) / SECONDS_PER_HOUR


def fixed_offset(value: datetime) -> datetime:
    """Same instant with the zone replaced by its fixed UTC offset at that instant."""
    return value.replace(tzinfo=timezone(value.utcoffset()))


@dataclass(frozen=True)
class ChargingInterval:
    start: datetime
    end: datetime
    energy_kwh: float

    @property
    def hours(self) -> float:
        return hours_between(self.start, self.end)

    @property
    def mean_power_kw(self) -> float:
        return self.energy_kwh / self.hours


@dataclass(frozen=True)
class PlugInWindow:
    """One contiguous plugged-in interval of a vehicle and the charging observed in it.

    ``rated_power_kw`` may be ``None`` on raw input; validation fills it from the
    largest observed interval power.
    """

    window_id: str
    vehicle_id: str
    utility_id: str
    region_id: str
    plug_in: datetime
    plug_out: datetime
    intervals: tuple[ChargingInterval, ...]
    rated_power_kw: float | None = None

    @property
    def demand_kwh(self) -> float:
        return sum(iv.energy_kwh for iv in self.intervals)

    @property
    def hours(self) -> float:
        return hours_between(self.plug_in, self.plug_out)

    @cached_property
    def span(self) -> tuple[float, float]:
        """(plug_in, plug_out) as epoch seconds."""
        return (self.plug_in.timestamp(), self.plug_out.timestamp())


@dataclass(frozen=True)
class UtilityRef:
    id: str
    display_name: str
    timezone: str
    standard_tariff_id: str
    ev_tariff_id: str | None = None

    @cached_property
    def zone(self) -> ZoneInfo:
        return ZoneInfo(self.timezone)


@dataclass(frozen=True)
class GridRegionRef:
    id: str
    display_name: str
    timezone: str


@dataclass(frozen=True)
class Catalog:
    utilities: dict[str, UtilityRef] = field(default_factory=dict)
    regions: dict[str, GridRegionRef] = field(default_factory=dict)

    def utility(self, utility_id: str) -> UtilityRef:
        return self.utilities[utility_id]

    def region(self, region_id: str) -> GridRegionRef:
        return self.regions[region_id]


def validate_window(window: PlugInWindow, catalog: Catalog) -> PlugInWindow:
    """Check every window invariant and resolve catalog references.

    Intervals are re-sorted by start, and a missing rated power falls back to
    the largest mean interval power. Applying this twice is a no-op.
    """
    wid = window.window_id
    t_in, t_out = window.plug_in.timestamp(), window.plug_out.timestamp()
    if not t_in < t_out:
        raise InvalidWindow(wid, "plug_out", "plug_out must be after plug_in")
    if not window.intervals:
        raise InvalidWindow(wid, "intervals", "window has no charging intervals")

    intervals = tuple(sorted(window.intervals, key=lambda iv: iv.start.timestamp()))
    for iv in intervals:
        t0, t1 = iv.start.timestamp(), iv.end.timestamp()
        if not t0 < t1:
            raise InvalidWindow(wid, "charge_end", "charge_end must be after charge_start")
        if not (iv.energy_kwh > 0 and iv.energy_kwh < float("inf")):
            raise NonPositiveEnergy(wid, "energy_kwh", f"energy {iv.energy_kwh!r} must be finite and > 0")
        if t0 < t_in or t1 > t_out:
            raise IntervalOutsideWindow(
                wid, "charge_start" if t0 < t_in else "charge_end",
                "charging interval extends outside [plug_in, plug_out]",
            )
    for prev, cur in zip(intervals, intervals[1:]):
        if cur.start.timestamp() < prev.end.timestamp():
            raise OverlappingIntervals(
                wid, "charge_start",
                f"interval starting {format_timestamp(cur.start)} overlaps the previous one",
            )

    if window.utility_id not in catalog.utilities:
        raise UnknownUtility(wid, "utility_id", f"unknown utility {window.utility_id!r}")
    if window.region_id not in catalog.regions:
        raise UnknownRegion(wid, "region_id", f"unknown region {window.region_id!r}")

    peak = max(iv.mean_power_kw for iv in intervals)
    rated = window.rated_power_kw
    if rated is None:
        rated = peak
    elif not rated > 0 or rated < peak * (1 - RATING_RTOL):
        raise PowerExceedsRating(
            wid, "rated_power_kw", f"observed {peak:.4f} kW exceeds rating {rated:.4f} kW"
        )

    if intervals == window.intervals and rated == window.rated_power_kw:
        return window
    return replace(window, intervals=intervals, rated_power_kw=rated)


def local_midnight(moment: datetime, zone: ZoneInfo, day_offset: int = 0) -> datetime:
    """Local midnight starting the calendar day of ``moment`` (shifted by whole days)."""
    local = moment.astimezone(zone)
    day = local.date() + timedelta(days=day_offset)
    return datetime(day.year, day.month, day.day, tzinfo=zone)
