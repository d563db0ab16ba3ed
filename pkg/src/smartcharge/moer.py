"""Marginal operating emissions rate (MOER) series: hourly averaging and emissions accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime
from typing import TYPE_CHECKING

import numpy as np

from smartcharge.errors import InsufficientCoverage, MoerCoverageGap, ZeroVariance

if TYPE_CHECKING:
    from smartcharge.optimizer import ChargingProfile
    from smartcharge.tariff import TariffSchedule

HOUR = 3600
LB_PER_MWH_TO_G_PER_KWH = 453.59237 / 1000.0
UNIT_FACTORS = {"g_per_kwh": 1.0, "lb_per_mwh": LB_PER_MWH_TO_G_PER_KWH}


def to_g_per_kwh(value: float, unit: str) -> float:
    try:
        return value * UNIT_FACTORS[unit]
    except KeyError:
        raise ValueError(f"unknown MOER unit {unit!r}; expected one of {sorted(UNIT_FACTORS)}") from None


@dataclass(frozen=True)
class MoerSeries:
    """Native-resolution MOER points (epoch seconds, g CO2e/kWh) for one grid region."""

    region_id: str
    times: np.ndarray
    values: np.ndarray
    native_step: int = 300

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=np.int64)
        values = np.asarray(self.values, dtype=float)
        if times.shape != values.shape or times.ndim != 1:
            raise ValueError("times and values must be 1-D arrays of equal length")
        if times.size and np.any(np.diff(times) <= 0):
            raise ValueError(f"{self.region_id}: MOER timestamps must be strictly increasing")
        if times.size and np.any((times - times[0]) % self.native_step):
            raise ValueError(f"{self.region_id}: MOER timestamps are off the {self.native_step}s grid")
        if np.any(~np.isfinite(values)) or np.any(values < 0):
            raise ValueError(f"{self.region_id}: MOER values must be finite and >= 0")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def coverage(self) -> tuple[int, int] | None:
        if not self.times.size:
            return None
        return int(self.times[0]), int(self.times[-1])


@dataclass(frozen=True)
class HourlyMoer:
    """Hour-start epochs (multiples of 3600 s) with mean MOER and native point counts."""

    region_id: str
    hours: np.ndarray
    values: np.ndarray
    counts: np.ndarray
    expected_per_hour: int = 12

    def __post_init__(self) -> None:
        hours = np.asarray(self.hours, dtype=np.int64)
        object.__setattr__(self, "hours", hours)
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        object.__setattr__(self, "counts", np.asarray(self.counts, dtype=np.int64))
        if hours.size:
            first = int(hours[0])
            dense = np.full(int(hours[-1] - first) // HOUR + 1, np.nan)
            dense[(hours - first) // HOUR] = self.values
        else:
            first, dense = 0, np.empty(0)
        object.__setattr__(self, "_first", first)
        object.__setattr__(self, "_dense", dense)

    @property
    def partial(self) -> np.ndarray:
        """Mask of hours averaged from fewer native points than expected."""
        return self.counts < self.expected_per_hour

    def lookup(self, hour_starts: np.ndarray) -> np.ndarray:
        """Vectorized lookup by hour-start epoch; raises on the first absent hour."""
        idx = (np.asarray(hour_starts, dtype=np.int64) - self._first) // HOUR
        if idx.size and idx.min() >= 0 and idx.max() < self._dense.size:
            out = self._dense[idx]
        else:
            ok = (idx >= 0) & (idx < self._dense.size)
            out = np.full(idx.shape, np.nan)
            out[ok] = self._dense[idx[ok]]
        missing = np.isnan(out)
        if missing.any():
            bad = int(np.asarray(hour_starts, dtype=np.int64)[np.flatnonzero(missing)[0]])
            raise MoerCoverageGap(self.region_id, bad)
        return out

    def covers(self, t0: float, t1: float) -> bool:
        first = int(np.floor(t0 / HOUR)) * HOUR
        last = int(np.ceil(t1 / HOUR)) * HOUR
        try:
            self.lookup(np.arange(first, max(last, first + HOUR), HOUR))
        except MoerCoverageGap:
            return False
        return True


def hourly_average(series: MoerSeries) -> HourlyMoer:
    """Average native points into UTC clock hours; hours without points are omitted."""
    per_hour = HOUR // series.native_step
    if not series.times.size:
        return HourlyMoer(series.region_id, np.empty(0), np.empty(0), np.empty(0), per_hour)
    bucket = (series.times // HOUR) * HOUR
    hours, inverse, counts = np.unique(bucket, return_inverse=True, return_counts=True)
    sums = np.bincount(inverse, weights=series.values)
    return HourlyMoer(series.region_id, hours, sums / counts, counts, per_hour)


def moer_at(hourly: HourlyMoer, t: datetime | float) -> float:
    seconds = t.timestamp() if isinstance(t, datetime) else t
    hour = int(np.floor(seconds / HOUR)) * HOUR
    return float(hourly.lookup(np.array([hour]))[0])


def emissions_of(profile: ChargingProfile, hourly: HourlyMoer) -> float:
    """Emissions in kg CO2e: segment energy split by clock hour times that hour's MOER."""
    pieces: list[tuple[float, float]] = []
    for seg in profile.segments:
        t = seg.start
        while t < seg.end:
            hour = math.floor(t / HOUR) * HOUR
            nxt = min(hour + HOUR, seg.end)
            pieces.append((hour, (nxt - t) / HOUR * seg.power_kw))
            t = nxt
    if not pieces:
        return 0.0
    hours, energy = np.array(pieces).T
    return float(np.dot(energy, hourly.lookup(hours))) / 1000.0


def _month_hours(zone, year: int, month: int) -> np.ndarray:
    start = datetime(year, month, 1, tzinfo=zone).timestamp()
    nxt = datetime(year + month // 12, month % 12 + 1, 1, tzinfo=zone).timestamp()
    first = np.floor(start / HOUR) * HOUR
    return np.arange(first, nxt, HOUR)


def correlate_rate_moer(
    tariff: TariffSchedule,
    hourly: HourlyMoer,
    year: int,
    month: int,
    *,
    pairwise: bool = False,
    min_coverage: float = 0.5,
) -> float:
    """Pearson correlation between tariff price and MOER by local hour of day for one month.

    Each clock hour's price is its time-weighted mean. With ``pairwise=True``
    the raw month-hour pairs are correlated instead of the 24-point profiles.
    """
    zone = tariff.zone
    hours = _month_hours(zone, year, month)
    idx = (hours.astype(np.int64) - hourly._first) // HOUR
    ok = (idx >= 0) & (idx < hourly._dense.size)
    moer = np.full(hours.shape, np.nan)
    moer[ok] = hourly._dense[idx[ok]]
    present = ~np.isnan(moer)
    if present.sum() < min_coverage * hours.size:
        raise InsufficientCoverage(
            f"{hourly.region_id}: {int(present.sum())} of {hours.size} hours present in {year}-{month:02d}"
        )
    hours, moer = hours[present], moer[present]
    price = np.empty(hours.shape)
    for i, h in enumerate(hours):
        edges, prices = tariff.pieces(float(h), float(h) + HOUR)
        price[i] = np.dot(np.diff(edges), prices) / HOUR

    if pairwise:
        x, y = price, moer
    else:
        local_hour = np.array([datetime.fromtimestamp(float(h), tz=zone).hour for h in hours])
        slots = [k for k in range(24) if np.any(local_hour == k)]
        x = np.array([price[local_hour == k].mean() for k in slots])
        y = np.array([moer[local_hour == k].mean() for k in slots])
    if np.ptp(x) == 0:
        raise ZeroVariance(f"tariff {tariff.tariff_id} has no price variation in {year}-{month:02d}")
    if np.ptp(y) == 0:
        raise ZeroVariance(f"MOER for {hourly.region_id} is constant in {year}-{month:02d}")
    return float(np.clip(np.corrcoef(x, y)[0, 1], -1.0, 1.0))
