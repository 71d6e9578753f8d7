from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multibarrier import (
    BarrierSchedule,
    BarrierSpec,
    MomentVector,
    moments_of_A,
    pmf_from_moments,
    price_multi_period,
    price_structure_floor,
    surjection_coefficient,
)
from multibarrier.structure_floor import (
    IllConditionedError,
    MomentInconsistencyError,
    bjorck_pereyra_dual,
    floor_from_pmf,
    subset_survival_sums,
)
from oracles import c_nu_J_brute, stirling2_table, surjections_brute

WIDE = BarrierSpec(1e-3, 1e5)


def _moments_of(probs, n_mom):
    vals = np.arange(len(probs), dtype=float)
    return [float(np.sum(probs * vals**nu)) for nu in range(n_mom)]


@pytest.mark.parametrize("nu,m,expected", [(0, 0, 1), (3, 0, 0), (2, 1, 1), (2, 2, 2), (3, 3, 6), (4, 3, 36)])
def test_surjection_examples(nu, m, expected):
    assert surjection_coefficient(nu, m) == expected


def test_surjection_zero_above_nu():
    assert surjection_coefficient(3, 5) == 0


def test_surjections_match_brute_force():
    for nu in range(0, 7):
        for m in range(0, 7):
            assert surjection_coefficient(nu, m) == surjections_brute(nu, m)


def test_c_nu_J_depends_only_on_size():
    n = 4
    for nu in range(1, 6):
        for size in range(1, n + 1):
            for J in itertools.combinations(range(n), size):
                assert c_nu_J_brute(nu, n, J) == surjection_coefficient(nu, size)


def test_surjections_via_stirling():
    s2 = stirling2_table(10)
    for nu in range(11):
        for m in range(11):
            assert surjection_coefficient(nu, m) == math.factorial(m) * s2[nu][m]


def test_moment_expansion_counts_subsets():
    # with every probability 1, E[A^nu] = n^nu
    for n in range(1, 7):
        for nu in range(0, 6):
            total = sum(surjection_coefficient(nu, m) * math.comb(n, m) for m in range(0, n + 1))
            assert total == n**nu


def test_bjorck_pereyra_matches_dense_solve():
    rng = np.random.default_rng(0)
    nodes = np.arange(6, dtype=float)
    rhs = rng.normal(size=6)
    ref = np.linalg.solve(np.vander(nodes, increasing=True).T, rhs)
    np.testing.assert_allclose(bjorck_pereyra_dual(nodes, rhs), ref, rtol=1e-9, atol=1e-10)
    exact = bjorck_pereyra_dual([Fraction(i) for i in range(6)], [Fraction(v) for v in rhs])
    np.testing.assert_allclose([float(v) for v in exact], ref, rtol=1e-9, atol=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_pmf_round_trip(n, seed):
    probs = np.random.default_rng(seed).dirichlet(np.ones(n + 1))
    res = pmf_from_moments(_moments_of(probs, n), probs[n], n)
    np.testing.assert_allclose(res.probs, probs, atol=1e-8)
    assert not res.clipped


def test_pmf_single_coupon():
    res = pmf_from_moments([1.0], 0.3, 1)
    np.testing.assert_allclose(res.probs, [0.7, 0.3], atol=1e-15)


def test_pmf_point_mass():
    n = 5
    probs = np.zeros(n + 1)
    probs[2] = 1.0
    res = pmf_from_moments(_moments_of(probs, n), 0.0, n)
    np.testing.assert_allclose(res.probs, probs, atol=1e-12)


def test_pmf_small_negative_is_clipped():
    probs = np.array([0.0, 1.0, 0.0])
    moms = _moments_of(probs, 2)
    moms[1] += 2e-7  # pushes P(A=0) slightly negative
    res = pmf_from_moments(moms, 0.0, 2)
    assert res.clipped and res.probs.min() >= 0.0
    assert res.probs.sum() == pytest.approx(1.0, abs=1e-15)


def test_inconsistent_moments_raise():
    with pytest.raises(MomentInconsistencyError):
        pmf_from_moments([1.0, 5.0, 2.0], 0.1, 3)
    with pytest.raises(MomentInconsistencyError):
        pmf_from_moments([1.0, 1.0], 1.5, 2)


def test_float_solve_ill_conditioned_for_large_n():
    probs = np.full(17, 1 / 17)
    with pytest.raises(IllConditionedError):
        pmf_from_moments(_moments_of(probs, 16), probs[16], 16, exact=False)
    # exact solve of the same system is fine
    res = pmf_from_moments(_moments_of(probs, 16), probs[16], 16)
    np.testing.assert_allclose(res.probs, probs, atol=1e-6)


def test_hankel_check():
    probs = np.array([0.2, 0.3, 0.1, 0.4])
    good = MomentVector.from_values(_moments_of(probs, 4), 3)
    assert good.hankel_ok()
    # variance would be negative
    assert not MomentVector.from_values([1.0, 2.0, 3.0, 5.0], 3).hankel_ok()


def test_first_moment_is_sum_of_window_survivals(market, barriers, coupon_schedule):
    moms = moments_of_A(market, barriers, coupon_schedule, 0.0)
    total = 0.0
    for start, length in coupon_schedule.windows:
        one = BarrierSchedule([(start, length)])
        total += price_multi_period(market, barriers, one, 0.0, 100.0).price * math.exp(market.rate * (start + length))
    assert moms.moments[1] == pytest.approx(total, abs=1e-12)


def test_wide_barriers_moments_are_powers(market, coupon_schedule):
    moms = moments_of_A(market, WIDE, coupon_schedule, 0.0, k_max=512, quad_nodes=256)
    np.testing.assert_allclose(moms.moments, [4.0**nu for nu in range(4)], rtol=1e-6)


def test_subset_sums_count_priced_schedules(market, barriers, coupon_schedule):
    sums = subset_survival_sums(market, barriers, coupon_schedule, 0.0, 4)
    assert sorted(sums.by_size) == [1, 2, 3, 4]
    # every non-empty subset concatenates to a distinct schedule
    assert sums.n_priced == 15
    assert sums.by_size[4] == sums.cache[((0.25, 1.0),)][0]


def test_floor_price_limits(market, barriers, coupon_schedule):
    disc = math.exp(-market.rate * coupon_schedule.end)
    tiny = price_structure_floor(market, barriers, coupon_schedule, 1e-9, 0.0)
    assert tiny.price == pytest.approx(disc * 1e-9 * tiny.pmf.probs[0], abs=1e-18)
    high = price_structure_floor(market, barriers, coupon_schedule, 6.0, 0.0)
    mean_a = float(high.pmf.probs @ np.arange(5))
    assert high.price == pytest.approx(disc * (6.0 - mean_a), abs=1e-8)
    assert high.price == pytest.approx(disc * (6.0 - high.moments.moments[1]), abs=1e-8)


def test_floor_price_monotone(market, coupon_schedule):
    base = BarrierSpec(80.0, 125.0)
    prices_f = [price_structure_floor(market, base, coupon_schedule, f, 0.0).price for f in (0.5, 1, 2, 3, 4)]
    assert all(a <= b for a, b in zip(prices_f, prices_f[1:]))
    prices_w = [
        price_structure_floor(market, BarrierSpec(100 / w, 100 * w), coupon_schedule, 2.0, 0.0).price
        for w in (1.1, 1.25, 1.5, 2.0)
    ]
    assert all(a >= b for a, b in zip(prices_w, prices_w[1:]))


def test_floor_from_pmf():
    assert floor_from_pmf([0.5, 0.25, 0.25], 1.5) == pytest.approx(1.5 * 0.5 + 0.5 * 0.25)
    assert floor_from_pmf([0.0, 0.0, 1.0], 2.0) == 0.0


def test_floor_rejects_gaps_and_late_valuation(market, barriers):
    gappy = BarrierSchedule.from_tenors([0.25, 0.75], 0.25)
    with pytest.raises(ValueError):
        price_structure_floor(market, barriers, gappy, 1.0, 0.0)
    with pytest.raises(ValueError):
        price_structure_floor(market, barriers, BarrierSchedule.coupon_strip(0.25, 0.25, 3), 1.0, 0.4)
    with pytest.raises(ValueError):
        price_structure_floor(market, barriers, BarrierSchedule.coupon_strip(0.25, 0.25, 3), 0.0, 0.0)
