from __future__ import annotations

import json
import math

import numpy as np
import pytest

import two_vehicle_day as tvd
from smartcharge.errors import MalformedRow, SchemaViolation, UnitMissing
from smartcharge.formats import (
    SESSION_COLUMNS,
    catalog_to_dict,
    dump_json,
    load_catalog,
    load_moer,
    load_sessions,
    load_tariffs,
    parse_tariffs,
    tariffs_to_list,
    write_moer,
    write_sessions,
)

HEADER = ",".join(SESSION_COLUMNS)


def row(wid, plug_in, plug_out, start, end, energy, rated="10", vehicle="veh-a"):
    return f"{wid},{vehicle},util_a,north,{plug_in},{plug_out},{start},{end},{energy},{rated}"


def write(tmp_path, *lines):
    p = tmp_path / "sessions.csv"
    p.write_text("\n".join((HEADER,) + lines) + "\n")
    return p


def test_rows_group_into_windows(tmp_path):
    p = write(
        tmp_path,
        row("w1", "2023-07-12T17:00:00-07:00", "2023-07-12T23:00:00-07:00",
            "2023-07-12T17:00:00-07:00", "2023-07-12T18:00:00-07:00", 10),
        row("w1", "2023-07-12T17:00:00-07:00", "2023-07-12T23:00:00-07:00",
            "2023-07-12T19:00:00-07:00", "2023-07-12T20:00:00-07:00", 4.5),
    )
    load = load_sessions(p, tvd.catalog())
    assert len(load.windows) == 1 and load.windows[0].demand_kwh == 14.5 and not load.rejects


def test_bad_row_rejects_only_its_window(tmp_path):
    p = write(
        tmp_path,
        row("bad", "2023-07-12T23:00:00-07:00", "2023-07-12T17:00:00-07:00",
            "2023-07-12T17:00:00-07:00", "2023-07-12T18:00:00-07:00", 1),
        row("ok", "2023-07-13T17:00:00-07:00", "2023-07-13T23:00:00-07:00",
            "2023-07-13T17:00:00-07:00", "2023-07-13T18:00:00-07:00", 1),
        row("nan", "2023-07-14T17:00:00-07:00", "2023-07-14T23:00:00-07:00",
            "2023-07-14T17:00:00-07:00", "2023-07-14T18:00:00-07:00", "nan"),
    )
    load = load_sessions(p, tvd.catalog())
    assert [w.window_id for w in load.windows] == ["ok"]
    assert {r.window_id: r.error for r in load.rejects} == {"bad": "InvalidWindow", "nan": "MalformedRow"}


def test_disagreeing_window_fields_reject(tmp_path):
    p = write(
        tmp_path,
        row("w", "2023-07-12T17:00:00-07:00", "2023-07-12T23:00:00-07:00",
            "2023-07-12T17:00:00-07:00", "2023-07-12T18:00:00-07:00", 1),
        row("w", "2023-07-12T17:00:00-07:00", "2023-07-12T23:30:00-07:00",
            "2023-07-12T19:00:00-07:00", "2023-07-12T20:00:00-07:00", 1),
    )
    load = load_sessions(p, tvd.catalog())
    assert not load.windows and len(load.rejects) == 2


def test_header_only_and_missing_columns(tmp_path):
    load = load_sessions(write(tmp_path), tvd.catalog())
    assert load.windows == [] and load.rejects == []
    bad = tmp_path / "b.csv"
    bad.write_text("window_id,vehicle_id\n")
    with pytest.raises(MalformedRow):
        load_sessions(bad, tvd.catalog())


def test_sessions_round_trip(tmp_path):
    p = tmp_path / "s.csv"
    write_sessions(p, tvd.windows())
    load = load_sessions(p, tvd.catalog())
    assert [w.window_id for w in load.windows] == ["A-1", "B-1"]
    for got, want in zip(load.windows, tvd.windows()):
        assert got.span == want.span and got.demand_kwh == want.demand_kwh
        assert [iv.start.timestamp() for iv in got.intervals] == [iv.start.timestamp() for iv in want.intervals]


def test_tariff_and_catalog_round_trip(tmp_path):
    dump_json(tmp_path / "t.json", tariffs_to_list(tvd.tariffs().values()))
    dump_json(tmp_path / "c.json", catalog_to_dict(tvd.catalog()))
    cat = load_catalog(tmp_path / "c.json")
    tariffs = load_tariffs(tmp_path / "t.json", cat)
    assert cat == tvd.catalog()
    assert tariffs["a_ev"].kind == "tou" and tariffs["a_std"].kind == "flat"
    assert tariffs["a_ev"].rate_at(tvd.local(tvd.DAY, 17).timestamp()) == 0.55


def flat_doc(**over):
    doc = {"tariff_id": "f", "utility_id": "util_a", "kind": "flat", "is_ev_variant": False,
           "seasons": [{"label": "y", "start": "01-01", "end": "12-31",
                        "periods": [{"label": "all", "day_set": "all", "start": "00:00", "end": "24:00",
                                     "price_usd_per_kwh": 0.13}]}]}
    doc.update(over)
    return doc


def test_minimal_flat_tariff_document():
    t = parse_tariffs([flat_doc()], tvd.catalog())["f"]
    assert t.kind == "flat" and t.timezone == "America/Los_Angeles"


def test_coverage_gap_is_a_schema_violation():
    doc = flat_doc(kind="tou")
    doc["seasons"][0]["periods"] = [
        {"label": "a", "day_set": "all", "start": "00:00", "end": "21:00", "price_usd_per_kwh": 0.1},
        {"label": "b", "day_set": "all", "start": "22:00", "end": "24:00", "price_usd_per_kwh": 0.2},
    ]
    with pytest.raises(SchemaViolation) as exc:
        parse_tariffs([doc], tvd.catalog())
    assert exc.value.path == "$[0]"


@pytest.mark.parametrize("mutate, path", [
    (lambda d: d.pop("kind"), "$[0].kind"),
    (lambda d: d["seasons"][0]["periods"][0].update(day_set="holidays"), "$[0].seasons[0].periods[0].day_set"),
    (lambda d: d["seasons"][0]["periods"][0].update(price_usd_per_kwh="cheap"),
     "$[0].seasons[0].periods[0].price_usd_per_kwh"),
])
def test_schema_paths(mutate, path):
    doc = flat_doc()
    mutate(doc)
    with pytest.raises(SchemaViolation) as exc:
        parse_tariffs([doc], tvd.catalog())
    assert exc.value.path == path


def test_moer_units(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("region_id,timestamp,value,unit\nr,2023-07-01T00:00:00Z,1000,lb_per_mwh\n"
                 "r,2023-07-01T00:05:00Z,1000,g_per_kwh\n")
    s = load_moer(p)["r"]
    assert s.values[0] == pytest.approx(453.59237) and s.values[1] == 1000
    p.write_text("region_id,timestamp,value\nr,2023-07-01T00:00:00Z,1\n")
    with pytest.raises(UnitMissing):
        load_moer(p)
    p.write_text("region_id,timestamp,value,unit\nr,2023-07-01T00:00:00Z,1,\n")
    with pytest.raises(UnitMissing):
        load_moer(p)


def test_moer_round_trip(tmp_path):
    series = tvd.moer_series()
    write_moer(tmp_path / "m.csv", series, unit="lb_per_mwh")
    back = load_moer(tmp_path / "m.csv")
    for s in series:
        np.testing.assert_array_equal(back[s.region_id].times, s.times)
        np.testing.assert_allclose(back[s.region_id].values, s.values, atol=1e-3)


def test_dump_json_is_sorted_and_nan_free(tmp_path):
    dump_json(tmp_path / "x.json", {"b": math.nan, "a": np.float64(1.5), "c": [np.int64(2)]})
    text = (tmp_path / "x.json").read_text()
    assert json.loads(text) == {"a": 1.5, "b": None, "c": [2]}
    assert text.index('"a"') < text.index('"b"')
