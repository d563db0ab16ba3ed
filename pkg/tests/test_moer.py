from __future__ import annotations

from datetime import datetime, timezone

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smartcharge.errors import InsufficientCoverage, MoerCoverageGap, ZeroVariance
from smartcharge.moer import (
    LB_PER_MWH_TO_G_PER_KWH,
    MoerSeries,
    correlate_rate_moer,
    emissions_of,
    hourly_average,
    moer_at,
    to_g_per_kwh,
)
from smartcharge.optimizer import ChargingProfile, Segment
from smartcharge.tariff import RatePeriod, Season, TariffSchedule, flat_tariff

H0 = int(datetime(2023, 7, 1, tzinfo=timezone.utc).timestamp())


def series(hour_values, region="r") -> MoerSeries:
    t = H0 + 300 * np.arange(12 * len(hour_values))
    return MoerSeries(region, t, np.repeat(np.asarray(hour_values, dtype=float), 12))


def test_hour_means():
    assert hourly_average(series([400])).values[0] == 400
    half = MoerSeries("r", H0 + 300 * np.arange(12), np.array([0.0] * 6 + [400.0] * 6))
    assert hourly_average(half).values[0] == 200


def test_partial_hour_is_flagged_but_used():
    s = MoerSeries("r", H0 + 300 * np.arange(7), np.full(7, 100.0))
    hr = hourly_average(s)
    assert hr.values[0] == 100 and bool(hr.partial[0])


def test_lookup_conventions():
    hr = hourly_average(series([100, 250, 300]))
    assert moer_at(hr, H0 + 3600 + 37 * 60) == 250
    assert moer_at(hr, H0 + 7200) == 300
    with pytest.raises(MoerCoverageGap):
        moer_at(hr, H0 + 3 * 3600)
    with pytest.raises(MoerCoverageGap):
        moer_at(hr, H0 - 1)


def test_gap_hour_inside_series():
    t = np.concatenate([H0 + 300 * np.arange(12), H0 + 7200 + 300 * np.arange(12)])
    hr = hourly_average(MoerSeries("r", t, np.full(24, 50.0)))
    assert hr.covers(H0, H0 + 3600) and not hr.covers(H0, H0 + 7200)


def test_emissions_examples():
    hr = hourly_average(series([400, 0, 300, 100]))
    assert emissions_of(ChargingProfile((Segment(H0, H0 + 3600, 10.0),)), hr) == pytest.approx(4.0)
    assert emissions_of(ChargingProfile((Segment(H0 + 3600, H0 + 7200, 5.0),)), hr) == 0.0
    two = ChargingProfile((Segment(H0 + 7200, H0 + 7200 + 1800, 4.0), Segment(H0 + 3 * 3600, H0 + 3 * 3600 + 1800, 6.0)))
    assert emissions_of(two, hr) == pytest.approx(0.9)
    assert emissions_of(ChargingProfile(), hr) == 0.0


def test_emissions_only_need_touched_hours():
    t = np.concatenate([H0 + 300 * np.arange(12), H0 + 7200 + 300 * np.arange(12)])
    hr = hourly_average(MoerSeries("r", t, np.full(24, 50.0)))
    prof = ChargingProfile((Segment(H0, H0 + 1800, 2.0), Segment(H0 + 7200, H0 + 9000, 2.0)))
    assert emissions_of(prof, hr) == pytest.approx(0.1)


def test_unit_conversion():
    assert to_g_per_kwh(1000, "lb_per_mwh") == pytest.approx(453.59237)
    assert LB_PER_MWH_TO_G_PER_KWH == pytest.approx(0.45359237)
    with pytest.raises(ValueError):
        to_g_per_kwh(1.0, "tons")


def test_series_validation():
    with pytest.raises(ValueError):
        MoerSeries("r", np.array([H0, H0]), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        MoerSeries("r", np.array([H0, H0 + 301]), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        MoerSeries("r", np.array([H0]), np.array([-1.0]))


def hourly_price_tariff(prices, tz="UTC") -> TariffSchedule:
    periods = tuple(RatePeriod(f"h{h}", "all", h * 60, (h + 1) * 60, p) for h, p in enumerate(prices))
    return TariffSchedule("t", "u", "tou", True, (Season("y", (1, 1), (12, 31), periods),), tz)


def month_series(moer_by_hour) -> MoerSeries:
    days = 31
    t = H0 + 300 * np.arange(12 * 24 * days)
    hour_of_day = (t - H0) // 3600 % 24
    return MoerSeries("r", t, np.asarray(moer_by_hour, dtype=float)[hour_of_day])


PRICES = [0.10 + 0.02 * ((5 * h) % 24) for h in range(24)]


@pytest.mark.parametrize("sign", [1, -1])
def test_affine_pairs_correlate_perfectly(sign):
    moer = [300 + sign * 500 * p for p in PRICES]
    r = correlate_rate_moer(hourly_price_tariff(PRICES), hourly_average(month_series(moer)), 2023, 7)
    assert r == pytest.approx(sign, abs=1e-9)
    r2 = correlate_rate_moer(hourly_price_tariff(PRICES), hourly_average(month_series(moer)), 2023, 7, pairwise=True)
    assert r2 == pytest.approx(sign, abs=1e-9)


def test_flat_tariff_has_zero_variance():
    with pytest.raises(ZeroVariance):
        correlate_rate_moer(flat_tariff("f", "u", 0.13), hourly_average(month_series(range(24))), 2023, 7)


def test_missing_month_is_insufficient():
    with pytest.raises(InsufficientCoverage):
        correlate_rate_moer(hourly_price_tariff(PRICES), hourly_average(month_series(range(24))), 2023, 3)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 100), st.floats(-500, 500), st.floats(0.01, 10), st.floats(-1, 1))
def test_correlation_is_affine_invariant(a, b, c, d):
    rng = np.random.default_rng(3)
    moer = rng.uniform(0, 800, 24)
    base = correlate_rate_moer(hourly_price_tariff(PRICES), hourly_average(month_series(moer)), 2023, 7)
    shifted = [c * p + d + 2 for p in PRICES]
    r = correlate_rate_moer(hourly_price_tariff(shifted), hourly_average(month_series(a * moer + b + 600)), 2023, 7)
    assert r == pytest.approx(base, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 1000), min_size=12, max_size=12), st.floats(0, 3000), st.floats(1, 7200), st.floats(0.1, 20))
def test_averaging_conserves_emissions_for_constant_hours(vals, offset, length, power):
    hour_vals = np.array(vals)
    s = MoerSeries("c", H0 + 300 * np.arange(12 * 12), np.repeat(hour_vals, 12))
    prof = ChargingProfile((Segment(H0 + offset, H0 + offset + length, power),))
    grams = 0.0
    for t, v in zip(s.times, s.values):
        lo, hi = max(H0 + offset, float(t)), min(H0 + offset + length, float(t) + 300)
        if hi > lo:
            grams += power * (hi - lo) / 3600 * v
    assert emissions_of(prof, hourly_average(s)) == pytest.approx(grams / 1000, abs=1e-9)
