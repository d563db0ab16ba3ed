"""Deterministic synthetic fleet: sessions, catalog, tariffs and 5-minute MOER series.

The built-in utilities are illustrative stand-ins shaped like common US
residential offerings (flat standard rate, optional EV TOU rate). Prices are
made up; they are not any utility's published rates.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from zoneinfo import ZoneInfo

import numpy as np

from smartcharge.config import SynthParams
from smartcharge.domain import Catalog, ChargingInterval, GridRegionRef, PlugInWindow, UtilityRef, fixed_offset
from smartcharge.formats import (
    catalog_to_dict,
    dump_json,
    tariffs_to_list,
    write_moer,
    write_sessions,
)
from smartcharge.moer import MoerSeries
from smartcharge.tariff import RatePeriod, Season, TariffSchedule, flat_tariff

RATED_POWERS_KW = (7.2, 9.6, 11.5)
RATED_POWER_WEIGHTS = (0.3, 0.3, 0.4)
MIN_STEP = 300

# (utility, name, tz, region, region name, MOER shape)
_UTILITIES = {
    "pge": ("PG&E-like CA utility", "America/Los_Angeles", "CAISO_NORTH", "CAISO North", "solar"),
    "sce": ("SCE-like CA utility", "America/Los_Angeles", "CAISO_SCE", "CAISO SCE", "solar"),
    "aps": ("APS-like AZ utility", "America/Phoenix", "AZPS", "Arizona Public Service", "thermal"),
    "ameren": ("Ameren-like IL utility", "America/Chicago", "MISO_SPRINGFIELD", "MISO Springfield", "baseload"),
}


def _p(label, day_set, start, end, price):
    return RatePeriod(label, day_set, start * 60, end * 60, price)


def builtin_tariffs() -> dict[str, TariffSchedule]:
    la, phx, chi = "America/Los_Angeles", "America/Phoenix", "America/Chicago"
    summer = ((6, 1), (9, 30))
    winter = ((10, 1), (5, 31))
    pge_ev = TariffSchedule(
        "pge_ev_tou", "pge", "tou", True,
        (
            Season("summer", *summer, (
                _p("off-peak", "all", 0, 15, 0.31), _p("part-peak", "all", 15, 16, 0.45),
                _p("peak", "all", 16, 21, 0.56), _p("part-peak", "all", 21, 24, 0.45),
            )),
            Season("winter", *winter, (
                _p("off-peak", "all", 0, 15, 0.29), _p("part-peak", "all", 15, 16, 0.40),
                _p("peak", "all", 16, 21, 0.44), _p("part-peak", "all", 21, 24, 0.40),
            )),
        ),
        la,
    )
    aps_ev = TariffSchedule(
        "aps_ev_tou", "aps", "tou", True,
        (Season("year", (1, 1), (12, 31), (
            _p("super-off-peak", "all", 23, 5, 0.07),
            _p("off-peak", "weekdays", 5, 16, 0.12), _p("on-peak", "weekdays", 16, 19, 0.29),
            _p("off-peak", "weekdays", 19, 23, 0.12), _p("off-peak", "weekends", 5, 23, 0.12),
        )),),
        phx,
    )
    ameren_ev = TariffSchedule(
        "ameren_ev_tou", "ameren", "tou", True,
        (Season("year", (1, 1), (12, 31), (
            _p("overnight", "all", 22, 6, 0.06), _p("daytime", "all", 6, 14, 0.12),
            _p("peak", "all", 14, 19, 0.21), _p("evening", "all", 19, 22, 0.12),
        )),),
        chi,
    )
    tiered = "consumption tiers flattened to a single representative per-kWh price"
    return {
        t.tariff_id: t
        for t in (
            flat_tariff("pge_standard", "pge", 0.33, la, note=tiered),
            pge_ev,
            flat_tariff("sce_standard", "sce", 0.30, la, note=tiered),
            flat_tariff("aps_standard", "aps", 0.14, phx, note=tiered),
            aps_ev,
            flat_tariff("ameren_standard", "ameren", 0.13, chi),
            ameren_ev,
        )
    }


def builtin_catalog() -> Catalog:
    ev = {"pge": "pge_ev_tou", "aps": "aps_ev_tou", "ameren": "ameren_ev_tou"}
    utilities, regions = {}, {}
    for uid, (name, tz, rid, rname, _) in _UTILITIES.items():
        utilities[uid] = UtilityRef(uid, name, tz, f"{uid}_standard", ev.get(uid))
        regions[rid] = GridRegionRef(rid, rname, tz)
    return Catalog(utilities, regions)


def _moer_shape(kind: str, local_hour: np.ndarray, day_of_year: np.ndarray) -> np.ndarray:
    h = local_hour
    season = np.cos(2 * np.pi * (day_of_year - 172) / 365.0)  # +1 near the June solstice
    if kind == "solar":
        solar = np.clip(np.sin(np.pi * (h - 6.5) / 12.5), 0, None)
        evening = np.exp(-0.5 * ((h - 19.5) / 1.8) ** 2)
        return 330 - (230 + 80 * season) * solar + 80 * evening
    if kind == "thermal":
        return 440 + 25 * np.sin(2 * np.pi * (h - 9) / 24)
    # coal on the margin overnight, gas during the day
    return 620 + 180 * np.cos(2 * np.pi * (h - 3) / 24)


def synthetic_moer(params: SynthParams, rng: np.random.Generator) -> list[MoerSeries]:
    """5-minute series per region spanning the study year plus a few days either side."""
    t0 = datetime(params.year, 1, 1, tzinfo=timezone.utc) - timedelta(days=4)
    n = (params.days + 8) * 86400 // MIN_STEP
    times = int(t0.timestamp()) + MIN_STEP * np.arange(n, dtype=np.int64)
    jan1_day = int(datetime(params.year, 1, 1, tzinfo=timezone.utc).timestamp()) // 86400
    out = []
    for uid, (_, tz, rid, _, kind) in _UTILITIES.items():
        zone = ZoneInfo(tz)
        # hour-of-day offsets are constant within each region's standard/daylight period
        offsets = np.array(
            [datetime.fromtimestamp(int(t), tz=zone).utcoffset().total_seconds() for t in times[::288]]
        )
        local = times + np.repeat(offsets, 288)[:n].astype(np.int64)
        local_hour = (local % 86400) / 3600.0
        doy = (local // 86400 - jan1_day) % 365
        base = _moer_shape(kind, local_hour, doy)
        daily = np.repeat(rng.normal(0, 25, n // 288 + 1), 288)[:n]
        noise = rng.normal(0, 8, n)
        out.append(MoerSeries(rid, times, np.round(np.clip(base + daily + noise, 0, None), 2), MIN_STEP))
    return out


@dataclass
class SyntheticFleet:
    windows: list[PlugInWindow]
    catalog: Catalog
    tariffs: dict[str, TariffSchedule]
    moer: list[MoerSeries]
    params: SynthParams

    @property
    def study_period(self) -> tuple[datetime, datetime]:
        start = datetime(self.params.year, 1, 1, tzinfo=timezone.utc)
        return start, start + timedelta(days=self.params.days)

    def write(self, out_dir: str | Path, moer_unit: str = "g_per_kwh") -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "sessions": out / "sessions.csv",
            "catalog": out / "catalog.json",
            "tariffs": out / "tariffs.json",
            "moer": out / "moer.csv",
        }
        write_sessions(paths["sessions"], self.windows)
        dump_json(paths["catalog"], catalog_to_dict(self.catalog))
        dump_json(paths["tariffs"], tariffs_to_list(self.tariffs.values()))
        write_moer(paths["moer"], self.moer, moer_unit)
        return paths


def _charge_start_minute(rng: np.random.Generator, peak: bool) -> int:
    if peak:
        return int(rng.integers(16 * 60, 21 * 60))
    u = rng.random()
    if u < 0.65:
        return int(rng.integers(21 * 60, 24 * 60))
    if u < 0.75:
        return int(rng.integers(0, 2 * 60))
    if u < 0.9:
        return int(rng.integers(11 * 60, 16 * 60))
    return int(rng.integers(6 * 60, 11 * 60))


def _round_s(dt: datetime) -> datetime:
    return dt.replace(microsecond=0)


def _vehicle_windows(
    vid: str, utility_id: str, params: SynthParams, rng: np.random.Generator
) -> list[PlugInWindow]:
    _, tz, rid, _, _ = _UTILITIES[utility_id]
    zone = ZoneInfo(tz)
    rated = float(rng.choice(RATED_POWERS_KW, p=RATED_POWER_WEIGHTS))
    k = params.sessions_shape
    n = int(np.clip(round(rng.gamma(k, params.mean_sessions_per_vehicle / k)), 1, params.days))
    daily = rng.gamma(params.daily_energy_shape, params.mean_daily_energy_kwh / params.daily_energy_shape)
    share = rng.lognormal(0.0, 0.35, n)
    energies = daily * params.days * share / share.sum()
    days = np.sort(rng.choice(params.days, size=n, replace=False))
    dur_shape = (params.plug_duration_mean_hours / params.plug_duration_sd_hours) ** 2
    dur_scale = params.plug_duration_mean_hours / dur_shape

    drafts = []
    for i, day in enumerate(days):
        immediate = rng.random() < params.immediate_start_share
        peak = rng.random() < params.peak_start_share
        minute = _charge_start_minute(rng, peak)
        d = datetime(params.year, 1, 1) + timedelta(days=int(day))
        charge_start = datetime(d.year, d.month, d.day, minute // 60, minute % 60, tzinfo=zone)
        # elapsed-time arithmetic must happen in UTC; aware local + timedelta is wall-clock math
        charge_start = charge_start.astimezone(timezone.utc) + timedelta(seconds=int(rng.integers(0, 60)))
        delay = timedelta(0) if immediate else timedelta(minutes=float(rng.uniform(30, 240)))
        plug_in = _round_s(charge_start - delay)
        power = rated * float(rng.uniform(0.8, 0.97))
        plug_hours = float(rng.gamma(dur_shape, dur_scale))
        energy = float(min(energies[i], 100.0))
        energy = max(round(energy, 3), 0.5)
        charge_h = energy / power
        intervals = []
        if rng.random() < params.multi_interval_share and charge_h > 1.0:
            first_e = round(energy * 0.6, 3)
            e1 = _round_s(charge_start + timedelta(hours=first_e / power))
            gap = timedelta(minutes=float(rng.uniform(30, 90)))
            s2 = _round_s(e1 + gap)
            e2 = _round_s(s2 + timedelta(hours=(energy - first_e) / power))
            intervals = [(charge_start, e1, first_e), (s2, e2, round(energy - first_e, 3))]
        else:
            intervals = [(charge_start, _round_s(charge_start + timedelta(hours=charge_h)), energy)]
        last_end = intervals[-1][1]
        plug_out = max(_round_s(plug_in + timedelta(hours=plug_hours)), last_end + timedelta(minutes=10))
        drafts.append((plug_in, plug_out, intervals))

    def local(t: datetime) -> datetime:
        return fixed_offset(t.astimezone(zone))

    windows = []
    prev_out = None
    for j, (plug_in, plug_out, intervals) in enumerate(drafts):
        if prev_out is not None and plug_in < prev_out + timedelta(minutes=5):
            continue
        if j + 1 < len(drafts):
            nxt = drafts[j + 1][0] - timedelta(minutes=5)
            if plug_out > nxt:
                plug_out = max(nxt, intervals[-1][1])
        windows.append(
            PlugInWindow(
                window_id=f"{vid}-{len(windows):04d}",
                vehicle_id=vid,
                utility_id=utility_id,
                region_id=rid,
                plug_in=local(plug_in),
                plug_out=local(plug_out),
                intervals=tuple(ChargingInterval(local(s), local(e), en) for s, e, en in intervals),
                rated_power_kw=rated,
            )
        )
        prev_out = plug_out
    return windows


def generate_synthetic_fleet(params: SynthParams | None = None, *, with_moer: bool = True) -> SyntheticFleet:
    """Build a reproducible fleet; identical params (including seed) give identical output."""
    params = params or SynthParams()
    rng = np.random.default_rng(params.seed)
    names = sorted(params.utility_mix)
    weights = np.array([params.utility_mix[u] for u in names])
    unknown = set(names) - set(_UTILITIES)
    if unknown:
        raise ValueError(f"utility_mix names unknown utilities {sorted(unknown)}; known: {sorted(_UTILITIES)}")
    windows: list[PlugInWindow] = []
    width = max(4, len(str(params.vehicles)))
    for v in range(params.vehicles):
        utility_id = names[int(rng.choice(len(names), p=weights / weights.sum()))]
        windows.extend(_vehicle_windows(f"veh{v:0{width}d}", utility_id, params, rng))
    moer = synthetic_moer(params, np.random.default_rng([params.seed, 1])) if with_moer else []
    return SyntheticFleet(windows, builtin_catalog(), builtin_tariffs(), moer, params)
