"""Multi-period double-barrier digitals by sine-series propagation.

Inside a barrier window the heat equation has Dirichlet conditions on
``(0, L)`` and each sine mode decays by ``exp(-(k pi / L)^2 p)``. In a free
period the state is convolved with the heat kernel and, if another window
follows, projected back onto the sine basis of ``(0, L)``. Composing these
steps is the same integral as the nested-sum closed form
(Fubini); :func:`price_two_period_nested` evaluates the nested form literally
for two windows and is kept as a test oracle.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Literal

import numpy as np

from multibarrier.constants import GAUSS_CUT, K_MAX, MIN_GAP, MODE_CUTOFF, QUAD_NODES
from multibarrier.core_model import (
    BarrierSchedule,
    BarrierSpec,
    HeatCoords,
    MarketParams,
    to_heat_coords,
)

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class FourierState:
    """``U(x) = sum_k coeffs[k-1] sin(k pi x / L)`` on ``(0, L)``, zero outside."""

    big_l: float
    coeffs: np.ndarray
    tau_label: float = 0.0

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.ndim != 1 or coeffs.size < 1:
            raise ValueError("coeffs must be a non-empty vector")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("coeffs must be finite")
        if not self.big_l > 0:
            raise ValueError(f"big_l must be positive, got {self.big_l}")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def k_max(self) -> int:
        return self.coeffs.size

    @property
    def wavenumbers(self) -> np.ndarray:
        return np.arange(1, self.k_max + 1) * (math.pi / self.big_l)

    def __call__(self, x) -> np.ndarray:
        """Evaluate the series, extended by zero outside ``(0, L)``."""
        x = np.asarray(x, dtype=float)
        vals = np.sin(np.multiply.outer(x, self.wavenumbers)) @ self.coeffs
        return np.where((x > 0) & (x < self.big_l), vals, 0.0)


@dataclass(frozen=True)
class PriceResult:
    price: float
    truncation_bound: float = 0.0
    quadrature_error: float = 0.0
    status: Literal["priced", "knocked_out"] = "priced"
    k_used: int = 0


# -- quadrature -------------------------------------------------------------


@lru_cache(maxsize=None)
def _legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(n)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def gauss_legendre(a, b, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on ``[a, b]``; ``a``, ``b`` may be arrays (broadcast on a new last axis)."""
    t, w = _legendre(n)
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    half = 0.5 * (b - a)
    return a + half * (t + 1.0), half * w


def gaussian_sine_integrals(
    x, spread: float, big_l: float, k_max: int, quad_nodes: int
) -> np.ndarray:
    """``(1/sqrt(2 pi)) int sin(k pi (x + y s) / L) exp(-y^2/2) dy`` over ``0 < x + y s < L``.

    Returns an array of shape ``x.shape + (k_max,)``. The support is the finite
    interval ``[-x/s, (L-x)/s]``, further cut to ``|y| <= GAUSS_CUT``.
    """
    x = np.asarray(x, dtype=float)
    lo = np.clip(-x / spread, -GAUSS_CUT, GAUSS_CUT)
    hi = np.clip((big_l - x) / spread, -GAUSS_CUT, GAUSS_CUT)
    y, w = gauss_legendre(lo, hi, quad_nodes)
    kern = w * np.exp(-0.5 * y * y) * _INV_SQRT_2PI
    wn = np.arange(1, k_max + 1) * (math.pi / big_l)
    z = x[..., None] + y * spread
    modes = np.sin(z[..., None] * wn)
    return np.einsum("...q,...qk->...k", kern, modes)


@lru_cache(maxsize=256)
def _transition_matrix(big_l: float, d: float, k_max: int, quad_nodes: int) -> np.ndarray:
    xs, ws = gauss_legendre(0.0, big_l, quad_nodes)
    g = gaussian_sine_integrals(xs, math.sqrt(2.0 * d), big_l, k_max, quad_nodes)
    wn = np.arange(1, k_max + 1) * (math.pi / big_l)
    proj = (2.0 / big_l) * (ws[:, None] * np.sin(np.outer(xs, wn)))
    mat = proj.T @ g
    mat.setflags(write=False)
    return mat


# -- operators --------------------------------------------------------------


def payoff_fourier_coeffs(alpha: float, big_l: float, k_max: int) -> FourierState:
    """Sine coefficients of ``exp(-alpha x)`` on ``(0, L)`` (the digital payoff)."""
    if not big_l > 0:
        raise ValueError(f"big_l must be positive, got {big_l}")
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    k = np.arange(1, k_max + 1, dtype=float)
    sign = np.where(k % 2 == 0, 1.0, -1.0)
    b = 2.0 * k * math.pi * (1.0 - sign * math.exp(-alpha * big_l))
    b /= (alpha * big_l) ** 2 + (k * math.pi) ** 2
    return FourierState(big_l, b, 0.0)


@lru_cache(maxsize=256)
def _payoff_coeffs(alpha: float, big_l: float, k_max: int) -> np.ndarray:
    return payoff_fourier_coeffs(alpha, big_l, k_max).coeffs


def decay_through_barrier(state: FourierState, p: float) -> FourierState:
    """Advance the state through an active window of transformed length ``p``."""
    if p < 0:
        raise ValueError(f"window length must be >= 0, got {p}")
    if p == 0:
        return state
    factors = np.exp(-(state.wavenumbers**2) * p)
    return replace(state, coeffs=state.coeffs * factors, tau_label=state.tau_label + p)


def diffuse_and_reproject(
    state: FourierState, d: float, quad_nodes: int = QUAD_NODES
) -> FourierState:
    """Heat-kernel convolution over a free period ``d``, projected back on ``(0, L)``."""
    if not d > 0:
        raise ValueError(f"free-period length must be > 0, got {d}")
    if quad_nodes < 8:
        raise ValueError(f"quad_nodes must be >= 8, got {quad_nodes}")
    mat = _transition_matrix(state.big_l, float(d), state.k_max, quad_nodes)
    return replace(state, coeffs=mat @ state.coeffs, tau_label=state.tau_label + d)


def evaluate_after_gap(state: FourierState, x: float, d: float, quad_nodes: int = QUAD_NODES) -> float:
    """Pointwise value at ``x`` after a free period ``d`` (no re-projection)."""
    g = gaussian_sine_integrals(np.array(x), math.sqrt(2.0 * d), state.big_l, state.k_max, quad_nodes)
    return float(g @ state.coeffs)


# -- truncation -------------------------------------------------------------


def adaptive_k(big_l: float, p_min: float, k_max: int) -> int:
    """Smallest mode count whose last mode has decayed below ``MODE_CUTOFF``, capped at ``k_max``."""
    if p_min <= 0:
        return k_max
    target = math.log(1.0 / MODE_CUTOFF) / p_min * (big_l / math.pi) ** 2 + 1.0
    return max(1, min(k_max, math.ceil(math.sqrt(target))))


def _tail_bound(alpha: float, big_l: float, k_used: int, lengths) -> float:
    # |b_k| <= 2 (1 + e^{-alpha L}) / (k pi) for the payoff and for every
    # re-projected state (sup does not grow under the heat kernel).
    amp = 2.0 * (1.0 + max(1.0, math.exp(-alpha * big_l)))
    # sum_{k>K} e^{-c k^2} / k <= e^{-c (K+1)^2} / ((K+1) (1 - e^{-c (2K+3)}))
    total = 0.0
    c0 = (math.pi / big_l) ** 2
    k1 = k_used + 1
    for p in lengths:
        c = c0 * p
        ratio = -math.expm1(-c * (2 * k1 + 1))
        if ratio <= 0:
            return math.inf
        total += amp / (k1 * math.pi) * math.exp(-c * k1 * k1) / ratio
    return total


def _warn_if_truncated(bound: float, k_used: int):
    if bound > 1e-6:
        warnings.warn(
            f"sine series truncated at {k_used} modes with tail bound {bound:.3g}; raise k_max",
            RuntimeWarning,
            stacklevel=3,
        )


# -- pricers ----------------------------------------------------------------


@lru_cache(maxsize=1024)
def _decay_factors(big_l: float, p: float, k_max: int) -> np.ndarray:
    wn = np.arange(1, k_max + 1) * (math.pi / big_l)
    out = np.exp(-(wn**2) * p)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=4096)
def _point_kernel(x: float, d: float, big_l: float, k_max: int, quad_nodes: int) -> np.ndarray:
    out = gaussian_sine_integrals(np.array(x), math.sqrt(2.0 * d), big_l, k_max, quad_nodes)
    out.setflags(write=False)
    return out


def _propagate(coords: HeatCoords, coeffs: np.ndarray, quad_nodes: int) -> np.ndarray:
    # array-level twin of decay_through_barrier / diffuse_and_reproject
    big_l, k = coords.big_l, coeffs.size
    images = coords.tau_images
    gaps = coords.gaps()
    for i in range(len(images) - 1, -1, -1):
        coeffs = coeffs * _decay_factors(big_l, images[i][1], k)
        if i > 0:
            d = gaps[len(images) - 1 - i]
            if d > MIN_GAP:
                coeffs = _transition_matrix(big_l, d, k, quad_nodes) @ coeffs
    return coeffs


def _value_u(coords: HeatCoords, coeffs: np.ndarray, quad_nodes: int) -> float:
    d0 = coords.final_gap
    if coords.in_window or d0 <= MIN_GAP:
        if not 0.0 < coords.x < coords.big_l:
            return 0.0
        wn = np.arange(1, coeffs.size + 1) * (math.pi / coords.big_l)
        return float(np.sin(wn * coords.x) @ coeffs)
    return float(_point_kernel(coords.x, d0, coords.big_l, coeffs.size, quad_nodes) @ coeffs)


def price_from_coords(
    coords: HeatCoords,
    k_max: int = K_MAX,
    quad_nodes: int = QUAD_NODES,
    initial_state: FourierState | None = None,
    estimate_quadrature: bool = True,
) -> PriceResult:
    """Price from precomputed heat coordinates; see :func:`price_multi_period`."""
    if coords.knocked_out:
        return PriceResult(0.0, status="knocked_out")
    if not coords.tau_images:
        # at maturity and alive: the payoff itself
        return PriceResult(1.0, k_used=0)
    p_min = min(p for _, p in coords.tau_images)
    if initial_state is None:
        k_used = adaptive_k(coords.big_l, p_min, k_max)
        coeffs = _payoff_coeffs(coords.alpha, coords.big_l, k_used)
    else:
        coeffs = initial_state.coeffs
        k_used = initial_state.k_max

    scale = math.exp(coords.alpha * coords.x + coords.beta * coords.tau)
    u = _value_u(coords, _propagate(coords, coeffs, quad_nodes), quad_nodes)
    price = max(scale * u, 0.0)

    quad_err = 0.0
    if estimate_quadrature:
        coarse = max(8, (3 * quad_nodes) // 4)
        u_coarse = _value_u(coords, _propagate(coords, coeffs, coarse), coarse)
        quad_err = abs(scale * (u - u_coarse))
    lengths = [p for _, p in coords.tau_images]
    bound = scale * _tail_bound(coords.alpha, coords.big_l, k_used, lengths)
    _warn_if_truncated(bound, k_used)
    return PriceResult(price, bound, quad_err, "priced", k_used)


def price_multi_period(
    market: MarketParams,
    barriers: BarrierSpec,
    schedule: BarrierSchedule,
    t: float,
    spot_at_t: float,
    k_max: int = K_MAX,
    quad_nodes: int = QUAD_NODES,
    initial_state: FourierState | None = None,
    estimate_quadrature: bool = True,
) -> PriceResult:
    """Discounted price of a digital paying 1 at the last window end if the
    spot stays strictly inside the barriers during every window.

    ``initial_state`` replaces the digital payoff's sine coefficients (for
    other payoffs with the same barrier conditions).
    """
    coords = to_heat_coords(market, barriers, schedule, t, spot_at_t)
    return price_from_coords(coords, k_max, quad_nodes, initial_state, estimate_quadrature)


def price_one_period(
    market: MarketParams,
    barriers: BarrierSpec,
    t0: float,
    p_len: float,
    t: float,
    spot_at_t: float,
    k_max: int = K_MAX,
    quad_nodes: int = QUAD_NODES,
) -> PriceResult:
    """Single window ``[t0, t0 + p_len]`` valued before it opens, as one closed-form series.

    ``sqrt(2 pi) (S/B_low)^alpha e^{beta tau} sum_k k (1 - (-1)^k e^{-alpha L}) /
    (alpha^2 L^2 + k^2 pi^2) e^{-(k pi/L)^2 p} int sin(k pi (x + y s)/L) e^{-y^2/2} dy``
    with ``s = sqrt(2 (tau - p))``.
    """
    if not 0 <= t < t0:
        raise ValueError(f"need 0 <= t < t0 for a pre-window valuation, got t={t}, t0={t0}")
    if not p_len > 0:
        raise ValueError(f"p_len must be positive, got {p_len}")
    if not spot_at_t > 0:
        raise ValueError(f"spot_at_t must be positive, got {spot_at_t}")
    half_var = 0.5 * market.vol**2
    alpha = -0.5 * (2.0 * market.rate / market.vol**2 - 1.0)
    beta = -2.0 * market.rate / market.vol**2 - alpha**2
    big_l = barriers.width
    x = math.log(spot_at_t / barriers.b_low)
    tau = half_var * (t0 + p_len - t)
    p = half_var * p_len
    if half_var * (t0 - t) <= MIN_GAP:
        return price_multi_period(
            market, barriers, BarrierSchedule([(t0, p_len)]), t, spot_at_t, k_max, quad_nodes
        )

    kk = adaptive_k(big_l, p, k_max)
    k = np.arange(1, kk + 1, dtype=float)
    sign = np.where(k % 2 == 0, 1.0, -1.0)
    series = k * (1.0 - sign * math.exp(-alpha * big_l)) / ((alpha * big_l) ** 2 + (k * math.pi) ** 2)
    series *= np.exp(-((k * math.pi / big_l) ** 2) * p)
    # gaussian_sine_integrals carries 1/sqrt(2 pi); undo it to keep the series literal
    integrals = gaussian_sine_integrals(np.array(x), math.sqrt(2.0 * (tau - p)), big_l, kk, quad_nodes)
    integrals = integrals / _INV_SQRT_2PI
    total = float(series @ integrals)
    price = math.sqrt(2.0 * math.pi) * (spot_at_t / barriers.b_low) ** alpha * math.exp(beta * tau) * total
    bound = math.exp(alpha * x + beta * tau) * _tail_bound(alpha, big_l, kk, [p])
    _warn_if_truncated(bound, kk)
    return PriceResult(max(price, 0.0), bound, 0.0, "priced", kk)


def price_two_period_nested(
    market: MarketParams,
    barriers: BarrierSpec,
    schedule: BarrierSchedule,
    t: float,
    spot_at_t: float,
    k_max: int = 24,
    quad_nodes: int = 96,
    payoff: Callable[[np.ndarray], np.ndarray] | None = None,
) -> PriceResult:
    """Literal tensor quadrature of the two-window nested-integral formula.

    Integrates ``h_1(k1, k2; x1, x2; y1, y2; x, tau)`` over ``x1, x2`` in
    ``(0, L)`` and ``y1, y2`` on their indicator supports, summing over both
    mode indices; nothing is reorganised into operators. Test-oracle use only.
    ``payoff`` replaces ``exp(-alpha x1)``.
    """
    if len(schedule) != 2:
        raise ValueError(f"nested oracle needs exactly two windows, got {len(schedule)}")
    (s1, l1), (s2, l2) = schedule.windows
    if not t < s1:
        raise ValueError("valuation must precede the first window")
    if not spot_at_t > 0:
        raise ValueError(f"spot_at_t must be positive, got {spot_at_t}")
    hv = 0.5 * market.vol**2
    k_ = 2.0 * market.rate / market.vol**2
    alpha = -0.5 * (k_ - 1.0)
    beta = -k_ - alpha**2
    big_l = barriers.width
    t_end = s2 + l2
    x = math.log(spot_at_t / barriers.b_low)
    tau = hv * (t_end - t)
    p1, p2 = hv * l1, hv * l2
    tau_1 = hv * (t_end - (s1 + l1))  # image of the first window's end; tau_2 = 0
    sp1 = math.sqrt(2.0 * (tau_1 - p2))
    sp2 = math.sqrt(2.0 * (tau - (tau_1 + p1)))
    if payoff is None:
        payoff = lambda z: np.exp(-alpha * z)  # noqa: E731

    ks = np.arange(1, k_max + 1, dtype=float) * math.pi / big_l
    x1, w1 = gauss_legendre(0.0, big_l, quad_nodes)
    x2, w2 = gauss_legendre(0.0, big_l, quad_nodes)

    # g_0 integrated over x1 at fixed k1: (2/L) int payoff(x1) sin(k1 pi x1 / L)
    g0_x1 = (2.0 / big_l) * np.einsum("q,q,qk->k", w1, payoff(x1), np.sin(np.outer(x1, ks)))

    # h_0(k1; x1; y1; x2, tau_1): y1 on [-x2/sp1, (L-x2)/sp1] per x2 node
    a1 = np.clip(-x2 / sp1, -GAUSS_CUT, GAUSS_CUT)
    b1 = np.clip((big_l - x2) / sp1, -GAUSS_CUT, GAUSS_CUT)
    y1, wy1 = gauss_legendre(a1, b1, quad_nodes)  # (Q, Q)
    arg1 = x2[:, None] + y1 * sp1
    h0 = np.einsum(
        "ij,ij,ijk->ik",
        wy1,
        _INV_SQRT_2PI * np.exp(-0.5 * y1 * y1),
        np.sin(arg1[..., None] * ks),
    )  # (x2, k1)
    h0 = h0 * (g0_x1 * np.exp(-(ks**2) * p2))[None, :]

    # g_1 integrated over x2: (2/L) int sin(k2 pi x2 / L) h_0(...; x2) dx2
    g1 = (2.0 / big_l) * np.einsum("i,ik,ij->kj", w2, np.sin(np.outer(x2, ks)), h0)  # (k2, k1)

    # h_1: y2 on [-x/sp2, (L-x)/sp2]
    a2 = np.clip(-x / sp2, -GAUSS_CUT, GAUSS_CUT)
    b2 = np.clip((big_l - x) / sp2, -GAUSS_CUT, GAUSS_CUT)
    y2, wy2 = gauss_legendre(a2, b2, quad_nodes)
    outer = np.einsum(
        "q,q,qk->k", wy2, _INV_SQRT_2PI * np.exp(-0.5 * y2 * y2), np.sin(np.outer(x + y2 * sp2, ks))
    )
    u = float(np.sum(outer[:, None] * np.exp(-(ks**2) * p1)[:, None] * g1))
    price = math.exp(alpha * x + beta * tau) * u
    return PriceResult(max(price, 0.0), 0.0, 0.0, "priced", k_max)
