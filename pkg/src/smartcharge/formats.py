"""Readers and writers for sessions, tariff, MOER, catalog and report files."""

from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from collections.abc import Iterable, Mapping
from dataclasses import asdict, dataclass, field, is_dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

from smartcharge.domain import (
    Catalog,
    ChargingInterval,
    GridRegionRef,
    PlugInWindow,
    UtilityRef,
    format_timestamp,
    parse_timestamp,
    validate_window,
)
from smartcharge.errors import MalformedRow, SchemaViolation, SmartChargeError, TariffError, UnitMissing
from smartcharge.moer import UNIT_FACTORS, HourlyMoer, MoerSeries, hourly_average
from smartcharge.tariff import RatePeriod, Season, TariffSchedule, parse_clock, parse_month_day

SESSION_COLUMNS = (
    "window_id", "vehicle_id", "utility_id", "region_id", "plug_in", "plug_out",
    "charge_start", "charge_end", "energy_kwh", "rated_power_kw",
)
MOER_COLUMNS = ("region_id", "timestamp", "value", "unit")
WINDOW_FIELDS = ("vehicle_id", "utility_id", "region_id", "plug_in", "plug_out", "rated_power_kw")


# ---------------------------------------------------------------- sessions


@dataclass(frozen=True)
class Reject:
    line: int
    window_id: str
    error: str
    message: str


@dataclass
class SessionLoad:
    windows: list[PlugInWindow] = field(default_factory=list)
    rejects: list[Reject] = field(default_factory=list)
    rows_read: int = 0
    rows_loaded: int = 0


def _parse_session_row(line: int, row: dict[str, str]) -> dict:
    out: dict = {}
    for col in SESSION_COLUMNS:
        value = row.get(col)
        if value is None:
            raise MalformedRow(line, col, "missing column")
        value = value.strip()
        if col in ("plug_in", "plug_out", "charge_start", "charge_end"):
            try:
                out[col] = parse_timestamp(value)
            except ValueError as exc:
                raise MalformedRow(line, col, str(exc)) from None
        elif col in ("energy_kwh", "rated_power_kw"):
            if col == "rated_power_kw" and value == "":
                out[col] = None
                continue
            try:
                num = float(value)
            except ValueError:
                raise MalformedRow(line, col, f"not a number: {value!r}") from None
            if not math.isfinite(num):
                raise MalformedRow(line, col, f"not finite: {value!r}")
            out[col] = num
        else:
            if not value:
                raise MalformedRow(line, col, "empty identifier")
            out[col] = value
    return out


def load_sessions(path: str | Path, catalog: Catalog) -> SessionLoad:
    """Read one-row-per-interval session CSV into validated windows.

    A bad row rejects its whole window; every other window still loads.
    """
    result = SessionLoad()
    groups: dict[str, list[tuple[int, dict]]] = defaultdict(list)
    broken: dict[str, tuple[int, str, str]] = {}
    lines_of: dict[str, list[int]] = defaultdict(list)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in SESSION_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise MalformedRow(1, missing[0], "header lacks required column")
        for row in reader:
            line = reader.line_num
            result.rows_read += 1
            wid = (row.get("window_id") or "").strip() or f"<line {line}>"
            lines_of[wid].append(line)
            try:
                groups[wid].append((line, _parse_session_row(line, row)))
            except MalformedRow as exc:
                broken.setdefault(wid, (line, "MalformedRow", str(exc)))

    for wid, lines in lines_of.items():
        if wid in broken:
            bad_line, err, msg = broken[wid]
            for ln in lines:
                note = msg if ln == bad_line else f"window rejected by line {bad_line}: {msg}"
                result.rejects.append(Reject(ln, wid, err, note))
            continue
        rows = groups[wid]
        head = rows[0][1]
        try:
            for ln, r in rows[1:]:
                for f in WINDOW_FIELDS:
                    if r[f] != head[f]:
                        raise MalformedRow(ln, f, f"disagrees with line {rows[0][0]} of the same window")
            window = PlugInWindow(
                window_id=wid,
                vehicle_id=head["vehicle_id"],
                utility_id=head["utility_id"],
                region_id=head["region_id"],
                plug_in=head["plug_in"],
                plug_out=head["plug_out"],
                intervals=tuple(
                    ChargingInterval(r["charge_start"], r["charge_end"], r["energy_kwh"]) for _, r in rows
                ),
                rated_power_kw=head["rated_power_kw"],
            )
            result.windows.append(validate_window(window, catalog))
            result.rows_loaded += len(rows)
        except SmartChargeError as exc:
            for ln, _ in rows:
                result.rejects.append(Reject(ln, wid, type(exc).__name__, str(exc)))
    result.rejects.sort(key=lambda r: r.line)
    return result


def write_sessions(path: str | Path, windows: Iterable[PlugInWindow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SESSION_COLUMNS)
        for win in windows:
            rated = "" if win.rated_power_kw is None else _num(win.rated_power_kw)
            for iv in win.intervals:
                w.writerow([
                    win.window_id, win.vehicle_id, win.utility_id, win.region_id,
                    format_timestamp(win.plug_in), format_timestamp(win.plug_out),
                    format_timestamp(iv.start), format_timestamp(iv.end), _num(iv.energy_kwh), rated,
                ])


# ---------------------------------------------------------------- catalog


def _require(obj: Mapping, key: str, path: str, kind: type | tuple = str):
    if not isinstance(obj, Mapping):
        raise SchemaViolation(path, "expected an object")
    if key not in obj:
        raise SchemaViolation(f"{path}.{key}", "required field missing")
    value = obj[key]
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise SchemaViolation(f"{path}.{key}", f"expected {getattr(kind, '__name__', kind)}")
    return value


def parse_catalog(doc: Mapping) -> Catalog:
    utilities, regions = {}, {}
    for i, u in enumerate(_require(doc, "utilities", "$", list)):
        p = f"$.utilities[{i}]"
        ev = u.get("ev_tariff_id") if isinstance(u, Mapping) else None
        if ev is not None and not isinstance(ev, str):
            raise SchemaViolation(f"{p}.ev_tariff_id", "expected string or null")
        ref = UtilityRef(
            _require(u, "id", p), _require(u, "name", p), _require(u, "timezone", p),
            _require(u, "standard_tariff_id", p), ev or None,
        )
        _check_zone(ref.timezone, f"{p}.timezone")
        if ref.id in utilities:
            raise SchemaViolation(f"{p}.id", f"duplicate utility {ref.id!r}")
        utilities[ref.id] = ref
    for i, r in enumerate(_require(doc, "regions", "$", list)):
        p = f"$.regions[{i}]"
        ref = GridRegionRef(_require(r, "id", p), _require(r, "name", p), _require(r, "timezone", p))
        _check_zone(ref.timezone, f"{p}.timezone")
        if ref.id in regions:
            raise SchemaViolation(f"{p}.id", f"duplicate region {ref.id!r}")
        regions[ref.id] = ref
    return Catalog(utilities, regions)


def _check_zone(name: str, path: str) -> None:
    from zoneinfo import ZoneInfo

    try:
        ZoneInfo(name)
    except Exception:
        raise SchemaViolation(path, f"unknown IANA timezone {name!r}") from None


def load_catalog(path: str | Path) -> Catalog:
    return parse_catalog(_read_json(path))


def catalog_to_dict(catalog: Catalog) -> dict:
    return {
        "utilities": [
            {"id": u.id, "name": u.display_name, "timezone": u.timezone,
             "standard_tariff_id": u.standard_tariff_id, "ev_tariff_id": u.ev_tariff_id}
            for u in catalog.utilities.values()
        ],
        "regions": [
            {"id": r.id, "name": r.display_name, "timezone": r.timezone} for r in catalog.regions.values()
        ],
    }


# ---------------------------------------------------------------- tariffs


def parse_tariffs(doc, catalog: Catalog | None = None) -> dict[str, TariffSchedule]:
    """Parse a JSON array of tariff objects; timezone comes from the owning utility."""
    if not isinstance(doc, list):
        raise SchemaViolation("$", "expected an array of tariff objects")
    out: dict[str, TariffSchedule] = {}
    for i, t in enumerate(doc):
        p = f"$[{i}]"
        tariff_id = _require(t, "tariff_id", p)
        utility_id = _require(t, "utility_id", p)
        kind = _require(t, "kind", p)
        if kind not in ("flat", "tou"):
            raise SchemaViolation(f"{p}.kind", "must be 'flat' or 'tou'")
        is_ev = _require(t, "is_ev_variant", p, bool)
        tz = t.get("timezone")
        if catalog is not None and utility_id in catalog.utilities:
            tz = catalog.utilities[utility_id].timezone
        if not tz:
            raise SchemaViolation(f"{p}.timezone", "no timezone: utility not in catalog and none given")
        _check_zone(tz, f"{p}.timezone")
        seasons = []
        for j, s in enumerate(_require(t, "seasons", p, list)):
            sp = f"{p}.seasons[{j}]"
            periods = []
            for k, per in enumerate(_require(s, "periods", sp, list)):
                pp = f"{sp}.periods[{k}]"
                day_set = _require(per, "day_set", pp)
                if day_set not in ("weekdays", "weekends", "all"):
                    raise SchemaViolation(f"{pp}.day_set", "must be weekdays, weekends or all")
                price = _require(per, "price_usd_per_kwh", pp, (int, float))
                try:
                    start, end = parse_clock(_require(per, "start", pp)), parse_clock(_require(per, "end", pp))
                except ValueError as exc:
                    raise SchemaViolation(pp, str(exc)) from None
                periods.append(RatePeriod(_require(per, "label", pp), day_set, start, end, float(price)))
            try:
                bounds = parse_month_day(_require(s, "start", sp)), parse_month_day(_require(s, "end", sp))
            except ValueError as exc:
                raise SchemaViolation(sp, f"bad month-day bound: {exc}") from None
            seasons.append(Season(_require(s, "label", sp), bounds[0], bounds[1], tuple(periods)))
        try:
            tariff = TariffSchedule(
                tariff_id, utility_id, kind, is_ev, tuple(seasons), tz, note=str(t.get("note", ""))
            )
        except TariffError as exc:
            raise SchemaViolation(p, str(exc)) from None
        if tariff_id in out:
            raise SchemaViolation(f"{p}.tariff_id", f"duplicate tariff {tariff_id!r}")
        out[tariff_id] = tariff
    return out


def load_tariffs(path: str | Path, catalog: Catalog | None = None) -> dict[str, TariffSchedule]:
    return parse_tariffs(_read_json(path), catalog)


def _clock(minute: int) -> str:
    return f"{minute // 60:02d}:{minute % 60:02d}"


def tariffs_to_list(tariffs: Iterable[TariffSchedule]) -> list[dict]:
    return [
        {
            "tariff_id": t.tariff_id,
            "utility_id": t.utility_id,
            "kind": t.kind,
            "is_ev_variant": t.is_ev_variant,
            "timezone": t.timezone,
            "note": t.note,
            "seasons": [
                {
                    "label": s.label,
                    "start": f"{s.start[0]:02d}-{s.start[1]:02d}",
                    "end": f"{s.end[0]:02d}-{s.end[1]:02d}",
                    "periods": [
                        {"label": p.label, "day_set": p.day_set, "start": _clock(p.start_minute),
                         "end": _clock(p.end_minute), "price_usd_per_kwh": p.price}
                        for p in s.periods
                    ],
                }
                for s in t.seasons
            ],
        }
        for t in tariffs
    ]


# ---------------------------------------------------------------- MOER


def load_moer(path: str | Path) -> dict[str, MoerSeries]:
    """Read MOER CSV (any declared unit) into g CO2e/kWh series keyed by region."""
    times: dict[str, list[int]] = defaultdict(list)
    values: dict[str, list[float]] = defaultdict(list)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return {}
        header = [h.strip() for h in header]
        if "unit" not in header:
            raise UnitMissing(f"{path}:1", "MOER file must declare a 'unit' column")
        for col in MOER_COLUMNS:
            if col not in header:
                raise SchemaViolation(f"{path}:1", f"missing column {col!r}")
        ir, it, iv, iu = (header.index(c) for c in MOER_COLUMNS)
        for line, row in enumerate(reader, start=2):
            unit = row[iu].strip() if len(row) > iu else ""
            if not unit:
                raise UnitMissing(f"{path}:{line}.unit", "unit is empty")
            if unit not in UNIT_FACTORS:
                raise SchemaViolation(f"{path}:{line}.unit", f"unknown unit {unit!r}")
            try:
                t = parse_timestamp(row[it]).timestamp()
                v = float(row[iv]) * UNIT_FACTORS[unit]
            except (ValueError, IndexError) as exc:
                raise SchemaViolation(f"{path}:{line}", str(exc)) from None
            if t != int(t):
                raise SchemaViolation(f"{path}:{line}.timestamp", "sub-second MOER timestamps are not supported")
            times[row[ir].strip()].append(int(t))
            values[row[ir].strip()].append(v)
    out = {}
    for region in sorted(times):
        t = np.asarray(times[region], dtype=np.int64)
        v = np.asarray(values[region])
        order = np.argsort(t, kind="stable")
        t, v = t[order], v[order]
        diffs = np.diff(t)
        step = int(diffs.min()) if diffs.size else 300
        if step <= 0 or 3600 % step:
            raise SchemaViolation(f"{path}[{region}]", f"native step {step}s is not a divisor of one hour")
        try:
            out[region] = MoerSeries(region, t, v, native_step=step)
        except ValueError as exc:
            raise SchemaViolation(f"{path}[{region}]", str(exc)) from None
    return out


def load_hourly_moer(path: str | Path) -> dict[str, HourlyMoer]:
    return {region: hourly_average(s) for region, s in load_moer(path).items()}


def write_moer(path: str | Path, series: Iterable[MoerSeries], unit: str = "g_per_kwh") -> None:
    from datetime import timezone

    factor = UNIT_FACTORS[unit]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(MOER_COLUMNS) + "\n")
        for s in series:
            for t, v in zip(s.times.tolist(), s.values.tolist()):
                stamp = datetime.fromtimestamp(t, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
                fh.write(f"{s.region_id},{stamp},{round(v / factor, 4)!r},{unit}\n")


# ---------------------------------------------------------------- reports


def _num(x: float) -> str:
    return repr(float(x))


def jsonable(obj):
    """Convert dataclasses, datetimes and non-finite floats into plain JSON values."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return jsonable(asdict(obj))
    if isinstance(obj, Mapping):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, datetime):
        return format_timestamp(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dump_json(path: str | Path, doc) -> None:
    Path(path).write_text(json.dumps(jsonable(doc), indent=2, sort_keys=True, allow_nan=False) + "\n")


def _read_json(path: str | Path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from None


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return _num(v) if math.isfinite(v) else ""
    if isinstance(v, datetime):
        return format_timestamp(v)
    return str(v)


def write_table(path: str | Path, columns: list[str], rows: Iterable[Mapping]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_table(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
