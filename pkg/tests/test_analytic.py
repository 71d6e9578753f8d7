from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from scipy import integrate

from multibarrier import (
    BarrierSchedule,
    BarrierSpec,
    FourierState,
    MarketParams,
    concatenate_windows,
    decay_through_barrier,
    diffuse_and_reproject,
    payoff_fourier_coeffs,
    price_multi_period,
    price_one_period,
    price_two_period_nested,
)
from oracles import corridor_survival, one_period_reflection_price

STD = dict(spot=100.0, b_low=80.0, b_up=125.0, rate=0.03, vol=0.25)


def test_payoff_coeffs_alpha_zero():
    st = payoff_fourier_coeffs(0.0, math.pi, 4)
    np.testing.assert_allclose(st.coeffs, [4 / math.pi, 0.0, 4 / (3 * math.pi), 0.0], atol=1e-15)


@pytest.mark.parametrize("alpha,big_l", [(-0.46, 0.446), (0.7, 1.3), (-2.0, 0.2)])
def test_payoff_coeffs_match_quadrature(alpha, big_l):
    st = payoff_fourier_coeffs(alpha, big_l, 12)
    for k in range(1, 13):
        ref, _ = integrate.quad(
            lambda z: math.exp(-alpha * z) * math.sin(k * math.pi * z / big_l), 0, big_l, epsabs=1e-14
        )
        assert st.coeffs[k - 1] == pytest.approx(2 / big_l * ref, abs=1e-10)


def test_decay_examples():
    st = FourierState(math.pi, np.ones(3))
    out = decay_through_barrier(st, 0.5)
    np.testing.assert_allclose(out.coeffs, np.exp(-np.array([1.0, 4.0, 9.0]) * 0.5), rtol=1e-15)
    assert decay_through_barrier(st, 0.0).coeffs.tolist() == [1.0, 1.0, 1.0]


def test_diffuse_tiny_gap_is_identity():
    st = FourierState(1.0, np.array([1.0, -0.5, 0.25, 0.0, 0.1]))
    out = diffuse_and_reproject(st, 1e-10, 128)
    np.testing.assert_allclose(out.coeffs, st.coeffs, atol=1e-6)


def test_diffuse_zero_state():
    st = FourierState(1.0, np.zeros(6))
    assert np.all(diffuse_and_reproject(st, 0.3, 64).coeffs == 0.0)


def test_diffuse_single_mode_brute_force():
    big_l, d = math.pi, 0.1
    st = FourierState(big_l, np.array([1.0, 0.0, 0.0, 0.0]))
    out = diffuse_and_reproject(st, d, 128)

    def convolved(x):
        f = lambda z: math.sin(z) * math.exp(-((x - z) ** 2) / (4 * d)) / math.sqrt(4 * math.pi * d)  # noqa: E731
        return integrate.quad(f, 0, big_l, epsabs=1e-14, epsrel=1e-13)[0]

    for k in range(1, 5):
        ref = integrate.quad(
            lambda x: convolved(x) * math.sin(k * x), 0, big_l, epsabs=1e-13, epsrel=1e-12
        )[0] * 2 / big_l
        assert out.coeffs[k - 1] == pytest.approx(ref, abs=1e-8)


def test_diffuse_rejects_bad_input():
    st = FourierState(1.0, np.ones(2))
    with pytest.raises(ValueError):
        diffuse_and_reproject(st, 0.0)
    with pytest.raises(ValueError):
        diffuse_and_reproject(st, 0.1, 4)


def test_one_period_matches_reflection(market, barriers):
    res = price_one_period(market, barriers, 0.25, 0.25, 0.0, 100.0)
    ref = one_period_reflection_price(**STD, t0=0.25, p_len=0.25)
    assert res.price == pytest.approx(ref, abs=1e-12)
    assert res.status == "priced"


def test_one_period_wide_barriers_is_discount_factor():
    market = MarketParams(100.0, 0.05, 0.2)
    wide = BarrierSpec(100.0 * 1e-6, 100.0 * 1e6)
    res = price_one_period(market, wide, 0.5, 0.5, 0.0, 100.0, k_max=512, quad_nodes=512)
    assert res.price == pytest.approx(math.exp(-0.05), rel=1e-4)


def test_one_period_narrow_barriers_vanishes():
    market = MarketParams(100.0, 0.05, 0.2)
    narrow = BarrierSpec(100.0 * math.exp(-5e-5), 100.0 * math.exp(5e-5))
    assert price_one_period(market, narrow, 0.5, 0.5, 0.0, 100.0).price < 1e-6


def test_one_period_requires_pre_window_valuation(market, barriers):
    with pytest.raises(ValueError):
        price_one_period(market, barriers, 0.25, 0.25, 0.3, 100.0)


def test_single_window_schedule_equals_one_period(market, barriers):
    sched = BarrierSchedule([(0.4, 0.3)])
    a = price_multi_period(market, barriers, sched, 0.1, 95.0).price
    b = price_one_period(market, barriers, 0.4, 0.3, 0.1, 95.0).price
    assert a == pytest.approx(b, abs=1e-10)


def test_adjacent_equals_concatenated(market, barriers, coupon_schedule):
    a = price_multi_period(market, barriers, coupon_schedule, 0.0, 100.0).price
    b = price_multi_period(market, barriers, concatenate_windows(coupon_schedule), 0.0, 100.0).price
    assert a == pytest.approx(b, abs=1e-10)


def test_nested_oracle_two_windows(market, barriers):
    sched = BarrierSchedule.from_tenors([0.25, 0.75], 0.25)
    nested = price_two_period_nested(market, barriers, sched, 0.0, 100.0)
    fast = price_multi_period(market, barriers, sched, 0.0, 100.0)
    assert nested.price == pytest.approx(fast.price, abs=1e-6)


def test_nested_oracle_small_gap_tends_to_concatenation(market, barriers):
    gap = 1e-6
    sched = BarrierSchedule([(0.25, 0.25), (0.5 + gap, 0.25)])
    merged = BarrierSchedule([(0.25, 0.5 + gap)])
    nested = price_two_period_nested(market, barriers, sched, 0.0, 100.0, k_max=32, quad_nodes=128)
    ref = price_multi_period(market, barriers, merged, 0.0, 100.0).price
    assert nested.price == pytest.approx(ref, abs=1e-4)


def test_nested_oracle_zero_payoff(market, barriers):
    sched = BarrierSchedule.from_tenors([0.25, 0.75], 0.25)
    res = price_two_period_nested(market, barriers, sched, 0.0, 100.0, payoff=lambda z: 0.0 * z)
    assert res.price == 0.0


def test_nested_oracle_needs_two_windows(market, barriers):
    with pytest.raises(ValueError):
        price_two_period_nested(market, barriers, BarrierSchedule([(0.25, 0.25)]), 0.0, 100.0)


@pytest.mark.parametrize("spot", [81.0, 90.0, 100.0, 120.0, 124.0])
def test_price_within_discount_bounds(market, barriers, coupon_schedule, spot):
    res = price_multi_period(market, barriers, coupon_schedule, 0.0, spot)
    assert 0.0 <= res.price <= math.exp(-market.rate * coupon_schedule.end)


def test_monotone_in_width_and_windows(market):
    sched = BarrierSchedule.from_tenors([0.2, 0.6, 1.0], 0.1)
    prices = [
        price_multi_period(market, BarrierSpec(100 / w, 100 * w), sched, 0.0, 100.0).price
        for w in (1.1, 1.2, 1.4, 1.8)
    ]
    assert all(a <= b for a, b in zip(prices, prices[1:]))
    barriers = BarrierSpec(80.0, 125.0)
    sub = price_multi_period(market, barriers, sched.subset([0, 2]), 0.0, 100.0).price
    full = price_multi_period(market, barriers, sched, 0.0, 100.0).price
    assert full <= sub + 1e-15


def test_truncation_bound_controls_doubling(market, barriers):
    sched = BarrierSchedule.from_tenors([0.25, 0.75], 0.25)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        small = price_multi_period(market, barriers, sched, 0.0, 100.0, k_max=3)
    big = price_multi_period(market, barriers, sched, 0.0, 100.0, k_max=6)
    assert abs(small.price - big.price) <= small.truncation_bound + small.quadrature_error


def test_valuation_inside_window_matches_images(market, barriers):
    sched = BarrierSchedule([(0.0, 0.5)])
    t, spot = 0.2, 105.0
    res = price_multi_period(market, barriers, sched, t, spot)
    mu = market.rate - 0.5 * market.vol**2
    surv = corridor_survival(math.log(spot), math.log(80.0), math.log(125.0), mu, market.vol, 0.3)
    assert res.price == pytest.approx(math.exp(-market.rate * 0.3) * float(surv), abs=1e-10)


def test_valuation_in_gap_after_past_window(market, barriers):
    sched = BarrierSchedule.from_tenors([0.0, 0.5], 0.25)
    a = price_multi_period(market, barriers, sched, 0.3, 97.0).price
    b = price_multi_period(market, barriers, BarrierSchedule([(0.5, 0.25)]), 0.3, 97.0).price
    assert a == pytest.approx(b, abs=1e-14)


def test_valuation_at_window_end(market, barriers):
    sched = BarrierSchedule.from_tenors([0.0, 0.5], 0.25)
    a = price_multi_period(market, barriers, sched, 0.25, 97.0).price
    b = price_multi_period(market, barriers, BarrierSchedule([(0.5, 0.25)]), 0.25, 97.0).price
    assert a == pytest.approx(b, abs=1e-14)
    assert price_multi_period(market, barriers, sched, 0.25, 130.0).status == "knocked_out"


def test_valuation_at_maturity(market, barriers):
    sched = BarrierSchedule([(0.0, 0.5)])
    assert price_multi_period(market, barriers, sched, 0.5, 100.0).price == 1.0
    assert price_multi_period(market, barriers, sched, 0.5, 125.0).status == "knocked_out"


def test_initial_state_hook_reproduces_digital(market, barriers, coupon_schedule):
    base = price_multi_period(market, barriers, coupon_schedule, 0.0, 100.0)
    alpha = -0.5 * (2 * market.rate / market.vol**2 - 1)
    state = payoff_fourier_coeffs(alpha, barriers.width, base.k_used)
    hooked = price_multi_period(market, barriers, coupon_schedule, 0.0, 100.0, initial_state=state)
    assert hooked.price == pytest.approx(base.price, abs=1e-15)


def test_knocked_out_inside_window(market, barriers):
    sched = BarrierSchedule([(0.0, 0.5)])
    for spot in (80.0, 125.0, 70.0):
        res = price_multi_period(market, barriers, sched, 0.1, spot)
        assert res.status == "knocked_out" and res.price == 0.0


def test_truncation_warning_for_wide_barriers():
    market = MarketParams(100.0, 0.05, 0.2)
    wide = BarrierSpec(1e-4, 1e8)
    with pytest.warns(RuntimeWarning):
        price_multi_period(market, wide, BarrierSchedule([(0.5, 0.5)]), 0.0, 100.0, k_max=16)
