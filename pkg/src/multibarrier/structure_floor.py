"""Structure floor ``(F - A)^+`` on a note with ``n`` adjacent barrier coupons.

``A`` counts the coupon windows the spot survives. Its moments are integer
combinations of survival probabilities of sub-schedules,

    E[A^nu] = sum_m surj(nu, m) * sum_{|J| = m} P(all windows in J survive),

the moment system on the nodes ``0..n-1`` is solved for the point masses and
``P(A = n)`` is the survival probability of the single merged window.

Moments are accumulated and the Vandermonde system is solved in exact
rational arithmetic on the floating-point survival probabilities, so the only
error left is that of the probabilities themselves; inclusion-exclusion
amplifies it by at most ``3^n``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from multibarrier.analytic import PriceResult, price_from_coords
from multibarrier.constants import (
    CLIP_TOL,
    CONDITION_LIMIT,
    INFEASIBLE_TOL,
    K_MAX,
    QUAD_NODES,
)
from multibarrier.core_model import (
    BarrierSchedule,
    BarrierSpec,
    MarketParams,
    concatenate_windows,
    to_heat_coords,
)


class MomentInconsistencyError(ValueError):
    """Moments do not belong to any distribution on ``{0..n}``."""


class IllConditionedError(ArithmeticError):
    """The floating-point moment solve exceeded the condition limit."""


def surjection_coefficient(nu: int, m: int) -> int:
    """Number of surjections from a ``nu``-set onto an ``m``-set.

    Equals the sum of multinomials ``nu! / (i_1! ... i_m!)`` over ``i_j >= 1``
    summing to ``nu``; zero when ``m > nu``.
    """
    if nu < 0 or m < 0:
        raise ValueError(f"nu and m must be non-negative, got nu={nu}, m={m}")
    return sum((-1) ** j * math.comb(m, j) * (m - j) ** nu for j in range(m + 1))


@dataclass(frozen=True)
class MomentVector:
    """Raw moments ``E[A^nu]``, ``nu = 0..len-1``, of a law on ``{0..n}``."""

    exact: tuple[Fraction, ...]
    n: int

    @classmethod
    def from_values(cls, values: Sequence[float], n: int) -> "MomentVector":
        return cls(tuple(Fraction(v) for v in values), n)

    @property
    def moments(self) -> np.ndarray:
        return np.array([float(m) for m in self.exact])

    def hankel_ok(self, tol: float = 1e-8) -> bool:
        """Positive semi-definiteness of the moment and localizing Hankel matrices.

        Support in ``[0, n]`` requires ``[m_{i+j}]``, ``[m_{i+j+1}]`` and
        ``[n m_{i+j} - m_{i+j+1}]`` to be PSD; each is diagonally scaled to unit
        diagonal before the eigenvalue check.
        """
        m = self.moments
        size = len(m)
        mats = []
        h = (size - 1) // 2 + 1
        mats.append(np.array([[m[i + j] for j in range(h)] for i in range(h)]))
        h1 = (size - 2) // 2 + 1
        if size >= 2:
            mats.append(np.array([[m[i + j + 1] for j in range(h1)] for i in range(h1)]))
            mats.append(np.array([[self.n * m[i + j] - m[i + j + 1] for j in range(h1)] for i in range(h1)]))
        for mat in mats:
            d = np.sqrt(np.clip(np.diag(mat), 0.0, None))
            if np.any(np.diag(mat) < -tol * max(1.0, np.abs(mat).max())):
                return False
            scale = np.where(d > 0, 1.0 / np.where(d > 0, d, 1.0), 0.0)
            scaled = mat * np.outer(scale, scale)
            if np.linalg.eigvalsh(scaled).min() < -tol:
                return False
        return True


@dataclass(frozen=True)
class CouponPmf:
    probs: np.ndarray
    residual: float
    condition_estimate: float
    clipped: bool = False


# -- Vandermonde --------------------------------------------------------------


def bjorck_pereyra_dual(nodes: Sequence, rhs: Sequence) -> list:
    """Solve ``sum_j nodes[j]**i z_j = rhs[i]`` for ``i = 0..n-1``.

    Works for any field type (``Fraction`` gives the exact solution).
    """
    x = list(nodes)
    b = list(rhs)
    n = len(x) - 1
    for k in range(n):
        for i in range(n, k, -1):
            b[i] = b[i] - x[k] * b[i - 1]
    for k in range(n - 1, -1, -1):
        for i in range(k + 1, n + 1):
            b[i] = b[i] / (x[i] - x[i - k - 1])
        for i in range(k, n):
            b[i] = b[i] - b[i + 1]
    return b


def vandermonde_condition(n_nodes: int) -> float:
    """Infinity-norm condition number of ``[i^nu]`` on the nodes ``0..n_nodes-1``."""
    if n_nodes == 1:
        return 1.0
    nodes = [Fraction(i) for i in range(n_nodes)]
    mat = [[Fraction(i) ** nu for i in range(n_nodes)] for nu in range(n_nodes)]
    inv_cols = []
    for col in range(n_nodes):
        e = [Fraction(int(r == col)) for r in range(n_nodes)]
        inv_cols.append(bjorck_pereyra_dual(nodes, e))
    norm = max(sum(abs(v) for v in row) for row in mat)
    inv_norm = max(sum(abs(inv_cols[c][r]) for c in range(n_nodes)) for r in range(n_nodes))
    return float(norm * inv_norm)


def pmf_from_moments(
    moments: MomentVector | Sequence[float],
    p_n: float,
    n: int | None = None,
    exact: bool = True,
) -> CouponPmf:
    """Point masses ``P(A = i)``, ``i = 0..n``, from ``E[A^nu]`` (``nu < n``) and ``P(A = n)``.

    Negative masses down to ``-CLIP_TOL`` are clipped and the vector
    renormalized; violations beyond ``INFEASIBLE_TOL`` raise
    :class:`MomentInconsistencyError`. With ``exact=False`` the solve runs in
    floating point and a condition number above ``CONDITION_LIMIT`` raises
    :class:`IllConditionedError`.
    """
    if not isinstance(moments, MomentVector):
        if n is None:
            n = len(moments)
        moments = MomentVector.from_values(moments, n)
    n = moments.n
    if len(moments.exact) != n:
        raise ValueError(f"need {n} moments (nu = 0..{n - 1}), got {len(moments.exact)}")
    if not -INFEASIBLE_TOL <= p_n <= 1 + INFEASIBLE_TOL:
        raise MomentInconsistencyError(f"P(A = n) = {p_n} is not a probability")

    cond = vandermonde_condition(n)
    pn = Fraction(p_n)
    rhs = [moments.exact[nu] - Fraction(n) ** nu * pn for nu in range(n)]
    if exact:
        sol = bjorck_pereyra_dual([Fraction(i) for i in range(n)], rhs)
        probs = np.array([float(v) for v in sol] + [float(pn)])
    else:
        if cond > CONDITION_LIMIT:
            raise IllConditionedError(
                f"moment system on {n} nodes has condition number {cond:.3e} > {CONDITION_LIMIT:.0e}"
            )
        sol = bjorck_pereyra_dual([float(i) for i in range(n)], [float(v) for v in rhs])
        probs = np.array(list(sol) + [float(pn)])

    violation = float(max(0.0, -probs.min(), probs.max() - 1.0))
    if violation > INFEASIBLE_TOL:
        raise MomentInconsistencyError(
            f"recovered masses leave [0, 1] by {violation:.3e}: {np.array2string(probs, precision=6)}"
        )
    clipped = violation > 0.0
    if clipped:
        probs = np.clip(probs, 0.0, 1.0)
        probs = probs / probs.sum()
    return CouponPmf(probs, violation, cond, clipped)


# -- pricing ------------------------------------------------------------------


@dataclass
class SubsetSurvival:
    """Survival probabilities summed by subset size, with the pricing diagnostics."""

    by_size: dict[int, Fraction]
    truncation_bound: float
    n_priced: int
    cache: dict = field(default_factory=dict, repr=False)


def _survival_probability(market, barriers, windows, t, spot, k_max, quad_nodes, cache):
    key = windows
    hit = cache.get(key)
    if hit is not None:
        return hit
    coords = to_heat_coords(market, barriers, BarrierSchedule(windows), t, spot)
    res = price_from_coords(coords, k_max, quad_nodes, estimate_quadrature=False)
    undiscount = math.exp(market.rate * (coords.t_end - t))
    out = (res.price * undiscount, res.truncation_bound * undiscount)
    cache[key] = out
    return out


def subset_survival_sums(
    market: MarketParams,
    barriers: BarrierSpec,
    schedule: BarrierSchedule,
    t: float,
    max_size: int,
    k_max: int = K_MAX,
    quad_nodes: int = QUAD_NODES,
    spot_at_t: float | None = None,
) -> SubsetSurvival:
    """``sum_{|J| = m} P(prod_{j in J} C_j = 1)`` for ``m = 1..max_size``, undiscounted.

    Each subset is priced on its concatenated windows; prices are cached by
    the concatenated window tuple.
    """
    spot = market.spot if spot_at_t is None else spot_at_t
    n = len(schedule)
    cache: dict = {}
    sums: dict[int, Fraction] = {}
    bound = 0.0
    for size in range(1, max_size + 1):
        acc = Fraction(0)
        for combo in itertools.combinations(range(n), size):
            windows = concatenate_windows(schedule.subset(combo)).windows
            prob, tb = _survival_probability(market, barriers, windows, t, spot, k_max, quad_nodes, cache)
            acc += Fraction(prob)
            bound += tb
        sums[size] = acc
    return SubsetSurvival(sums, bound, len(cache), cache)


def _check_coupon_schedule(schedule: BarrierSchedule, t: float):
    if not schedule.is_contiguous():
        raise ValueError("structure floor needs adjacent coupon windows (T_{i-1} + P = T_i)")
    if t > schedule.start:
        raise ValueError(f"valuation time {t} must not be after the first coupon window {schedule.start}")


def moments_of_A(
    market: MarketParams,
    barriers: BarrierSpec,
    schedule: BarrierSchedule,
    t: float,
    k_max: int = K_MAX,
    quad_nodes: int = QUAD_NODES,
    spot_at_t: float | None = None,
    _sums: SubsetSurvival | None = None,
) -> MomentVector:
    """``E[A^nu]`` for ``nu = 0..n-1`` from survival probabilities of sub-schedules."""
    _check_coupon_schedule(schedule, t)
    n = len(schedule)
    sums = _sums or subset_survival_sums(
        market, barriers, schedule, t, max(n - 1, 0), k_max, quad_nodes, spot_at_t
    )
    out = [Fraction(1)]
    for nu in range(1, n):
        out.append(sum((surjection_coefficient(nu, m) * sums.by_size[m] for m in range(1, nu + 1)), Fraction(0)))
    return MomentVector(tuple(out), n)


@dataclass(frozen=True)
class FloorResult:
    price: float
    truncation_bound: float
    quadrature_error: float
    status: str
    pmf: CouponPmf
    moments: MomentVector
    discount: float


def floor_from_pmf(probs: Sequence[float], floor: float) -> float:
    """Undiscounted ``sum_{i <= min(n, floor(F))} (F - i) P(A = i)``."""
    n = len(probs) - 1
    top = min(n, math.floor(floor))
    return float(sum((floor - i) * probs[i] for i in range(top + 1)))


def price_structure_floor(
    market: MarketParams,
    barriers: BarrierSpec,
    schedule: BarrierSchedule,
    floor: float,
    t: float,
    k_max: int = K_MAX,
    quad_nodes: int = QUAD_NODES,
    spot_at_t: float | None = None,
) -> FloorResult:
    """Value at ``t`` of ``(F - A)^+`` paid at the last coupon date."""
    if not floor > 0:
        raise ValueError(f"floor must be positive, got {floor}")
    _check_coupon_schedule(schedule, t)
    n = len(schedule)
    spot = market.spot if spot_at_t is None else spot_at_t
    disc = math.exp(-market.rate * (schedule.end - t))

    def solve(nodes: int):
        sums = subset_survival_sums(market, barriers, schedule, t, n, k_max, nodes, spot)
        moments = moments_of_A(market, barriers, schedule, t, k_max, nodes, spot, _sums=sums)
        pmf = pmf_from_moments(moments, float(sums.by_size[n]))
        return disc * floor_from_pmf(pmf.probs, floor), pmf, moments, sums

    price, pmf, moments, sums = solve(quad_nodes)
    coarse, *_ = solve(max(8, (3 * quad_nodes) // 4))
    # each mass is an alternating sum over at most 3^n subset probabilities
    bound = disc * floor * sums.truncation_bound * 2.0**n
    return FloorResult(price, bound, abs(price - coarse), "priced", pmf, moments, disc)
