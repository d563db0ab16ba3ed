"""Hand-built two-vehicle day: a TOU utility with a 16:00-21:00 peak and a flat utility.

Expected values below were worked out by hand before the optimizer existed.
MOER is constant within each local hour; Los Angeles is on a whole-hour offset
in July, so local hours coincide with UTC clock hours.
"""

from __future__ import annotations

from datetime import date, datetime, timedelta
from zoneinfo import ZoneInfo

import numpy as np

from smartcharge.domain import Catalog, ChargingInterval, GridRegionRef, PlugInWindow, UtilityRef
from smartcharge.moer import MoerSeries, hourly_average
from smartcharge.tariff import RatePeriod, Season, TariffSchedule, flat_tariff

LA = ZoneInfo("America/Los_Angeles")
DAY = date(2023, 7, 12)

MOER_NORTH = [300, 310, 320, 330, 340, 350, 300, 250, 150, 80, 40, 20,
              10, 0, 30, 120, 250, 380, 400, 420, 410, 390, 360, 320]
MOER_SOUTH_12 = [280, 270, 260, 250, 255, 265, 240, 200, 120, 60, 20, 5,
                 0, 0, 15, 90, 220, 330, 350, 370, 360, 340, 310, 290]
MOER_SOUTH_13 = [285, 275, 230, 225, 235, 245, 210, 180, 110, 50, 25, 10,
                 2, 1, 12, 100, 230, 340, 355, 365, 350, 335, 300, 295]

EXPECTED = {
    # window_id: (baseline, constrained, unconstrained) as (USD, kg)
    "A-1": ((6.00, 8.0), (5.00, 7.5), (5.00, 0.1)),
    "B-1": ((5.04, 6.22), (5.04, 3.84), (5.04, 0.002)),
}


def local(day: date, h: int, m: int = 0) -> datetime:
    return datetime(day.year, day.month, day.day, h, m, tzinfo=LA)


def tariffs() -> dict[str, TariffSchedule]:
    periods = (
        RatePeriod("off-peak", "all", 21 * 60, 16 * 60, 0.25),
        RatePeriod("peak", "all", 16 * 60, 21 * 60, 0.55),
    )
    tou = TariffSchedule("a_ev", "util_a", "tou", True, (Season("year", (1, 1), (12, 31), periods),),
                         "America/Los_Angeles")
    return {
        "a_std": flat_tariff("a_std", "util_a", 0.30, "America/Los_Angeles"),
        "a_ev": tou,
        "b_std": flat_tariff("b_std", "util_b", 0.28, "America/Los_Angeles"),
    }


def catalog() -> Catalog:
    return Catalog(
        utilities={
            "util_a": UtilityRef("util_a", "Utility A", "America/Los_Angeles", "a_std", "a_ev"),
            "util_b": UtilityRef("util_b", "Utility B", "America/Los_Angeles", "b_std", None),
        },
        regions={
            "north": GridRegionRef("north", "North", "America/Los_Angeles"),
            "south": GridRegionRef("south", "South", "America/Los_Angeles"),
        },
    )


def _series(region: str, by_day: dict[date, list[float]]) -> MoerSeries:
    times, values = [], []
    for day, hourly in sorted(by_day.items()):
        t0 = int(local(day, 0).timestamp())
        for h, v in enumerate(hourly):
            for k in range(12):
                times.append(t0 + h * 3600 + k * 300)
                values.append(v)
    return MoerSeries(region, np.array(times), np.array(values, dtype=float))


def moer_series() -> list[MoerSeries]:
    nxt = DAY + timedelta(days=1)
    return [
        _series("north", {DAY: MOER_NORTH, nxt: MOER_NORTH}),
        _series("south", {DAY: MOER_SOUTH_12, nxt: MOER_SOUTH_13}),
    ]


def hourly():
    return {s.region_id: hourly_average(s) for s in moer_series()}


def windows() -> list[PlugInWindow]:
    nxt = DAY + timedelta(days=1)
    a = PlugInWindow(
        "A-1", "veh-a", "util_a", "north", local(DAY, 17), local(DAY, 23),
        (ChargingInterval(local(DAY, 17), local(DAY, 18), 10.0),
         ChargingInterval(local(DAY, 19), local(DAY, 20), 10.0)),
        rated_power_kw=10.0,
    )
    b = PlugInWindow(
        "B-1", "veh-b", "util_b", "south", local(DAY, 18, 30), local(nxt, 7, 15),
        (ChargingInterval(local(DAY, 18, 30), local(DAY, 20), 12.0),
         ChargingInterval(local(DAY, 22), local(DAY, 22, 45), 6.0)),
        rated_power_kw=8.0,
    )
    return [a, b]
