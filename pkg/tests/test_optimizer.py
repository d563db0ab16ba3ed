from __future__ import annotations

from datetime import datetime
from zoneinfo import ZoneInfo

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import two_vehicle_day as tvd
from smartcharge import _kernels_py, kernels
from smartcharge.domain import ChargingInterval, PlugInWindow
from smartcharge.errors import InfeasibleDemand, TooManySlots
from smartcharge.moer import HourlyMoer
from smartcharge.optimizer import (
    Slot,
    SlotSet,
    allocation_of,
    build_slots,
    optimize,
    optimize_allocation,
    optimize_constrained,
    optimize_unconstrained,
    oracle_allocation,
    oracle_optimize,
    unconstrained_region,
)
from smartcharge.tariff import cost_of, flat_tariff

LA = ZoneInfo("America/Los_Angeles")


def slots_of(price, moer, cap, step=900.0) -> SlotSet:
    n = len(price)
    start = np.arange(n) * step
    return SlotSet(start, start + step, price, moer, np.broadcast_to(np.asarray(cap, dtype=float), (n,)))


def test_six_slot_example():
    s = slots_of([0.1, 0.1, 0.1, 0.2, 0.2, 0.2], [300, 100, 200, 50, 400, 60], 3.0)
    _, alloc = optimize_allocation(7.0, s)
    np.testing.assert_allclose(alloc, [1, 3, 3, 0, 0, 0])
    cost, kg = s.objective(alloc)
    assert cost == pytest.approx(0.70) and kg == pytest.approx(1.2)
    assert s.objective(oracle_allocation(7.0, s)) == pytest.approx((0.70, 1.2))


def test_single_cheapest_slot():
    s = slots_of([0.2, 0.5], [0, 0], 5.0)
    prof = optimize(5.0, s)
    assert cost_of(prof, flat_tariff("x", "u", 0.2)) == pytest.approx(1.0)
    np.testing.assert_allclose(allocation_of(prof, s), [5, 0])


def test_saturation_is_the_whole_region():
    s = slots_of([0.3, 0.1, 0.2], [1, 2, 3], 2.5)
    prof = optimize(7.5, s)
    assert len(prof.segments) == 1
    seg = prof.segments[0]
    assert (seg.start, seg.end, seg.power_kw) == (0.0, 2700.0, 10.0)


def test_partial_slot_runs_at_rated_power_from_its_start():
    s = slots_of([0.1], [100], 10.0, step=3600.0)
    prof = oracle_optimize(5.0, s)
    assert [(x.start, x.end, x.power_kw) for x in prof.segments] == [(0.0, 1800.0, 10.0)]
    assert optimize(0.0, s).segments == ()


def test_infeasible_and_oracle_limits():
    s = slots_of([0.1] * 3, [1] * 3, 1.0)
    with pytest.raises(InfeasibleDemand):
        optimize(3.5, s)
    optimize(3.0 + 1e-12, s)  # within tolerance
    with pytest.raises(TooManySlots):
        oracle_allocation(1.0, slots_of([0.1] * 13, [1] * 13, 1.0))


def test_slot_sequence_interface():
    s = slots_of([0.1, 0.2], [5, 6], 2.0)
    assert isinstance(s[1], Slot) and s[1].price == 0.2 and s[1].power_kw == 8.0
    assert len(s[:1]) == 1 and SlotSet.from_slots(list(s)).total_capacity == 4.0


@st.composite
def instances(draw):
    n = draw(st.integers(1, 12))
    grid = draw(st.booleans())
    if grid:
        price = draw(st.lists(st.sampled_from([0.1, 0.2]), min_size=n, max_size=n))
        moer = draw(st.lists(st.sampled_from([0.0, 100.0, 250.0]), min_size=n, max_size=n))
    else:
        # tariffs quote at most micro-dollar resolution
        price = [round(p, 6) for p in draw(st.lists(st.floats(0, 1), min_size=n, max_size=n))]
        moer = draw(st.lists(st.floats(0, 1000), min_size=n, max_size=n))
    cap = draw(st.lists(st.floats(0.01, 10), min_size=n, max_size=n))
    frac = draw(st.floats(0, 1))
    s = slots_of(price, moer, cap)
    return frac * s.total_capacity, s


@settings(max_examples=300, deadline=None)
@given(instances())
def test_greedy_matches_oracle(inst):
    demand, s = inst
    _, alloc = optimize_allocation(demand, s)
    got, want = s.objective(alloc), s.objective(oracle_allocation(demand, s))
    assert got[0] == pytest.approx(want[0], abs=1e-9)
    assert got[1] == pytest.approx(want[1], abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(instances())
def test_allocation_conserves_and_respects_capacity(inst):
    demand, s = inst
    _, alloc = optimize_allocation(demand, s)
    assert alloc.sum() == pytest.approx(demand, abs=1e-9)
    assert np.all(alloc >= 0) and np.all(alloc <= s.capacity + 1e-12)
    prof = optimize(demand, s)
    assert prof.total_energy_kwh == pytest.approx(demand, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(instances())
def test_backends_agree(inst):
    demand, s = inst
    a = kernels.greedy_fill(s.price, s.moer, s.start, s.capacity, demand)
    b = _kernels_py.greedy_fill(s.price, s.moer, s.start, s.capacity, demand)
    np.testing.assert_allclose(a, b, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1e5), st.floats(60, 2e5), st.sampled_from([300.0, 900.0, 3600.0]),
       st.lists(st.floats(-1e4, 3e5), max_size=8))
def test_cut_backends_agree(t0, length, step, extra):
    ex = np.sort(np.asarray(extra, dtype=float))
    a = kernels.build_cuts(t0, t0 + length, step, ex)
    b = _kernels_py.build_cuts(t0, t0 + length, step, ex)
    np.testing.assert_array_equal(a, b)


def flat_hourly(value=100.0, hours=72) -> HourlyMoer:
    h0 = int(datetime(2023, 7, 11, tzinfo=LA).timestamp()) // 3600 * 3600
    return HourlyMoer("r", h0 + 3600 * np.arange(hours), np.full(hours, value), np.full(hours, 12))


def test_uniform_cut():
    t0 = datetime(2023, 7, 12, 10, tzinfo=LA).timestamp()
    s = build_slots((t0, t0 + 7200), 10.0, flat_tariff("f", "u", 0.2, "America/Los_Angeles"), flat_hourly())
    assert len(s) == 8 and len(set(s.price)) == 1 and len(set(s.moer)) == 1


def test_slots_never_straddle_price_changes():
    t0 = datetime(2023, 7, 12, 18, 30, tzinfo=LA).timestamp()
    s = build_slots((t0, t0 + 3 * 3600), 10.0, tvd.tariffs()["a_ev"], flat_hourly(), slot_len=3600)
    nine = datetime(2023, 7, 12, 21, tzinfo=LA).timestamp()
    assert nine in s.start
    assert not np.any((s.start < nine) & (s.end > nine))


def test_capacities_follow_slot_fractions():
    t0 = datetime(2023, 7, 12, 10, 20, tzinfo=LA).timestamp()
    s = build_slots((t0, t0 + 5400), 10.0, flat_tariff("f", "u", 0.2), flat_hourly(), slot_len=3600)
    np.testing.assert_allclose(s.capacity, [10 * 40 / 60, 10 * 50 / 60])
    assert s.total_capacity == pytest.approx(15.0)


def test_slot_length_must_divide_an_hour():
    with pytest.raises(ValueError):
        build_slots((0, 3600), 1.0, flat_tariff("f", "u", 0.2), flat_hourly(), slot_len=7 * 60)


def _window(start, end, energy, rated=10.0, wid="w", ivs=None) -> PlugInWindow:
    ivs = ivs or (ChargingInterval(start, end, energy),)
    return PlugInWindow(wid, "v", "util_a", "north", start, end, tuple(ivs), rated)


def test_tou_window_leaves_the_peak():
    w = tvd.windows()[0]
    prof = optimize_constrained(w, tvd.tariffs()["a_ev"], tvd.hourly()["north"])
    peak = (datetime(2023, 7, 12, 16, tzinfo=LA).timestamp(), datetime(2023, 7, 12, 21, tzinfo=LA).timestamp())
    assert prof.energy_between(*peak) == 0.0
    assert prof.total_energy_kwh == pytest.approx(w.demand_kwh)


def test_full_day_window_matches_unconstrained():
    day = datetime(2023, 7, 12, tzinfo=LA)
    w = _window(day, datetime(2023, 7, 13, tzinfo=LA), 20.0)
    t, h = tvd.tariffs()["a_ev"], tvd.hourly()["north"]
    assert unconstrained_region([w], t) == w.span
    assert optimize_constrained(w, t, h) == optimize_unconstrained(w, t, h)


def test_unconstrained_beats_a_peak_window():
    w = _window(datetime(2023, 7, 12, 17, tzinfo=LA), datetime(2023, 7, 12, 19, tzinfo=LA), 10.0)
    t, h = tvd.tariffs()["a_ev"], tvd.hourly()["north"]
    assert cost_of(optimize_unconstrained(w, t, h), t) < cost_of(optimize_constrained(w, t, h), t)


def test_same_day_windows_optimize_jointly():
    a = _window(datetime(2023, 7, 12, 7, tzinfo=LA), datetime(2023, 7, 12, 9, tzinfo=LA), 4.0, wid="a")
    b = _window(datetime(2023, 7, 12, 18, tzinfo=LA), datetime(2023, 7, 12, 22, tzinfo=LA), 6.0, wid="b")
    t, h = tvd.tariffs()["a_ev"], tvd.hourly()["north"]
    prof = optimize_unconstrained([a, b], t, h)
    assert prof.total_energy_kwh == pytest.approx(10.0)
    # the two zero-ish MOER midday hours take all 10 kWh
    noon = datetime(2023, 7, 12, 12, tzinfo=LA).timestamp()
    assert prof.energy_between(noon, noon + 7200) == pytest.approx(10.0)


def test_unplugging_at_midnight_claims_no_extra_day():
    w = _window(datetime(2023, 7, 12, 20, tzinfo=LA), datetime(2023, 7, 13, tzinfo=LA), 5.0)
    lo, hi = unconstrained_region([w], tvd.tariffs()["a_ev"])
    assert (hi - lo) == 86400
