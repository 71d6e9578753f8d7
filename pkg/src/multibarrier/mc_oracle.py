"""Monte Carlo cross-check for barrier digitals, coupon counts and occupation puts.

Paths are exact GBM skeletons on a grid with ``steps_per_window`` steps per
barrier window. Free periods before a window carry no monitoring and are
crossed in one exact step; the occupation-time estimators use a uniform grid
over the whole horizon instead.

Discrete monitoring misses excursions between grid points, so survival is
biased upward. With ``richardson_levels > 1`` every path is also monitored on
the grids with 2, 4, ... times fewer points (subsets of the fine grid) and
the estimates are combined per path to cancel the ``m^{-1/2}`` and ``m^{-1}``
terms of the bias expansion in the number of steps ``m``.

Batch ``b`` draws from its own generator seeded with ``(seed, b)`` and every
batch is simulated in full, so path ``i`` does not depend on ``n_paths``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Literal

import numpy as np

from multibarrier.constants import BATCH_PATHS, N_PATHS, SEED, STEPS_PER_WINDOW
from multibarrier.core_model import BarrierSchedule, BarrierSpec, MarketParams, concatenate_windows


@dataclass(frozen=True)
class McConfig:
    n_paths: int = N_PATHS
    steps_per_window: int = STEPS_PER_WINDOW
    seed: int = SEED
    antithetic: bool = False
    richardson_levels: int = 1

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError(f"n_paths must be >= 1, got {self.n_paths}")
        if self.steps_per_window < 1:
            raise ValueError(f"steps_per_window must be >= 1, got {self.steps_per_window}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.antithetic and self.n_paths % 2:
            raise ValueError("antithetic sampling needs an even n_paths")
        if not 1 <= self.richardson_levels <= 3:
            raise ValueError("richardson_levels must be 1, 2 or 3")
        if self.steps_per_window % (1 << (self.richardson_levels - 1)):
            raise ValueError("steps_per_window must be divisible by 2^(richardson_levels-1)")


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_paths: int
    bias_note: Literal["upward_survival_bias", "none"] = "none"


def richardson_weights(levels: int) -> np.ndarray:
    """Weights for grids with ``m, m/2, m/4`` steps cancelling ``m^{-1/2}`` and ``m^{-1}``.

    Ordered finest first.
    """
    h = np.array([2.0 ** (0.5 * i) for i in range(levels)])  # relative m^{-1/2}
    mat = np.vander(h, levels, increasing=True).T
    rhs = np.zeros(levels)
    rhs[0] = 1.0
    return np.linalg.solve(mat, rhs)


def _batch_rng(seed: int, batch: int) -> np.random.Generator:
    return np.random.default_rng([seed, batch])


def _normals(rng: np.random.Generator, shape, antithetic: bool) -> np.ndarray:
    if not antithetic:
        return rng.standard_normal(shape)
    half = rng.standard_normal((shape[0] // 2,) + tuple(shape[1:]))
    out = np.empty(shape)
    out[0::2] = half
    out[1::2] = -half
    return out


def _batches(config: McConfig) -> Iterator[tuple[int, np.random.Generator, int]]:
    n_batches = -(-config.n_paths // BATCH_PATHS)
    for b in range(n_batches):
        keep = min(BATCH_PATHS, config.n_paths - b * BATCH_PATHS)
        yield b, _batch_rng(config.seed, b), keep


def _validate(schedule: BarrierSchedule, t: float):
    if len(schedule) == 0:
        raise ValueError("empty schedule")
    if t > schedule.start:
        raise ValueError(f"valuation time {t} must not be after the first window start {schedule.start}")


def simulate_survival_indicators(
    market: MarketParams,
    barriers: BarrierSpec,
    schedule: BarrierSchedule,
    config: McConfig,
    t: float = 0.0,
    strides: tuple[int, ...] | None = None,
) -> np.ndarray:
    """Per-path, per-window survival bits, shape ``(levels, n_paths, n_windows)``.

    Level ``l`` monitors every ``strides[l]``-th point of the fine grid; by
    default ``strides = (1, 2, 4)[:richardson_levels]``. A window's bit is set
    iff every monitored point of the closed window lies strictly between the
    barriers; a point shared by adjacent windows counts for both.
    """
    _validate(schedule, t)
    m = config.steps_per_window
    if strides is None:
        strides = tuple(1 << lev for lev in range(config.richardson_levels))
    if any(st < 1 or m % st for st in strides):
        raise ValueError(f"strides {strides} must divide steps_per_window={m}")
    levels = len(strides)
    mu = market.rate - 0.5 * market.vol**2
    lo, hi = math.log(barriers.b_low), math.log(barriers.b_up)
    x0 = math.log(market.spot)
    n_win = len(schedule)
    bits = np.empty((levels, config.n_paths, n_win), dtype=bool)

    for b, rng, keep in _batches(config):
        rows = BATCH_PATHS
        x = np.full(rows, x0)
        clock = t
        for w, (start, length) in enumerate(schedule.windows):
            gap = start - clock
            if gap > 0:
                z = _normals(rng, (rows,), config.antithetic)
                x = x + mu * gap + market.vol * math.sqrt(gap) * z
            dt = length / m
            z = _normals(rng, (rows, m), config.antithetic)
            path = np.empty((rows, m + 1))
            path[:, 0] = x
            np.cumsum(mu * dt + market.vol * math.sqrt(dt) * z, axis=1, out=path[:, 1:])
            path[:, 1:] += x[:, None]
            inside = (path > lo) & (path < hi)
            for lev, stride in enumerate(strides):
                bits[lev, b * BATCH_PATHS : b * BATCH_PATHS + keep, w] = inside[
                    :keep, ::stride
                ].all(axis=1)
            x = path[:, -1]
            clock = start + length
    return bits


def _combine(samples: np.ndarray, config: McConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-path Richardson combination, then mean and standard error.

    ``samples`` has shape ``(levels, n_paths, ...)``. Antithetic pairs are
    averaged first so the standard error reflects their correlation.
    """
    w = richardson_weights(samples.shape[0])
    per_path = np.tensordot(w, samples.astype(float), axes=1)
    if config.antithetic:
        per_path = 0.5 * (per_path[0::2] + per_path[1::2])
    n = per_path.shape[0]
    mean = per_path.mean(axis=0)
    se = per_path.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
    return mean, se


def _bias_note(config: McConfig) -> str:
    return "upward_survival_bias" if config.richardson_levels == 1 else "none"


def estimate_bd_price(
    market: MarketParams,
    barriers: BarrierSpec,
    schedule: BarrierSchedule,
    t: float,
    config: McConfig,
) -> McEstimate:
    """Discounted probability that every window survives.

    Adjacent windows are concatenated first; the product of their indicators
    is the indicator of the merged window, and both schedules share one grid.
    """
    schedule = concatenate_windows(schedule)
    bits = simulate_survival_indicators(market, barriers, schedule, config, t)
    mean, se = _combine(bits.all(axis=2), config)
    disc = math.exp(-market.rate * (schedule.end - t))
    return McEstimate(disc * float(mean), disc * float(se), config.n_paths, _bias_note(config))


@dataclass(frozen=True)
class CouponPmfEstimate:
    """Empirical law of the coupon count ``A`` (undiscounted)."""

    probs: np.ndarray
    std_errors: np.ndarray
    n_paths: int
    bias_note: str


def estimate_coupon_functional(
    market: MarketParams,
    barriers: BarrierSpec,
    schedule: BarrierSchedule,
    fn: Callable[[np.ndarray], np.ndarray],
    config: McConfig,
    t: float = 0.0,
) -> McEstimate:
    """Undiscounted ``E[fn(A)]`` with ``A`` the number of surviving windows."""
    bits = simulate_survival_indicators(market, barriers, schedule, config, t)
    counts = bits.sum(axis=2)
    mean, se = _combine(fn(counts), config)
    return McEstimate(float(mean), float(se), config.n_paths, _bias_note(config))


def estimate_coupon_pmf(
    market: MarketParams,
    barriers: BarrierSpec,
    schedule: BarrierSchedule,
    config: McConfig,
    t: float = 0.0,
) -> CouponPmfEstimate:
    bits = simulate_survival_indicators(market, barriers, schedule, config, t)
    counts = bits.sum(axis=2)
    n = len(schedule)
    onehot = counts[..., None] == np.arange(n + 1)
    mean, se = _combine(onehot, config)
    return CouponPmfEstimate(mean, se, config.n_paths, _bias_note(config))


def simulate_occupation(
    market: MarketParams,
    barriers: BarrierSpec,
    horizon: float,
    n_steps: int,
    config: McConfig,
    window_counts: tuple[int, ...] = (),
) -> tuple[np.ndarray, dict[int, np.ndarray]]:
    """Occupation time of the closed corridor on ``[0, horizon]`` per path.

    Uses the trapezoid rule on a uniform grid of ``n_steps`` steps. For each
    ``n`` in ``window_counts`` (must divide ``n_steps``) also returns the
    per-path count of the ``n`` equal windows whose grid points all lie
    strictly inside the barriers.
    """
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    for n in window_counts:
        if n_steps % n:
            raise ValueError(f"window count {n} must divide n_steps={n_steps}")
    mu = market.rate - 0.5 * market.vol**2
    lo, hi = math.log(barriers.b_low), math.log(barriers.b_up)
    dt = horizon / n_steps
    occ = np.empty(config.n_paths)
    survived = {n: np.empty(config.n_paths, dtype=np.int64) for n in window_counts}
    for b, rng, keep in _batches(config):
        z = _normals(rng, (BATCH_PATHS, n_steps), config.antithetic)
        path = np.empty((BATCH_PATHS, n_steps + 1))
        path[:, 0] = math.log(market.spot)
        np.cumsum(mu * dt + market.vol * math.sqrt(dt) * z, axis=1, out=path[:, 1:])
        path[:, 1:] += path[:, :1]
        closed = ((path >= lo) & (path <= hi)).astype(float)
        sl = slice(b * BATCH_PATHS, b * BATCH_PATHS + keep)
        occ[sl] = dt * (closed[:keep, 1:-1].sum(axis=1) + 0.5 * (closed[:keep, 0] + closed[:keep, -1]))
        if window_counts:
            strict = (path[:keep] > lo) & (path[:keep] < hi)
            for n in window_counts:
                step = n_steps // n
                ok = np.ones((keep, n), dtype=bool)
                for i in range(n):
                    ok[:, i] = strict[:, i * step : (i + 1) * step + 1].all(axis=1)
                survived[n][sl] = ok.sum(axis=1)
    return occ, survived


def estimate_occupation_put(
    market: MarketParams,
    barriers: BarrierSpec,
    horizon: float,
    strike: float,
    config: McConfig,
) -> McEstimate:
    """``e^{-r T} E[(strike - occupation)^+]`` with occupation measured in years.

    The horizon is gridded with ``steps_per_window`` steps.
    """
    if strike < 0:
        raise ValueError(f"strike must be >= 0, got {strike}")
    occ, _ = simulate_occupation(market, barriers, horizon, config.steps_per_window, config)
    payoff = np.maximum(strike - occ, 0.0)[None, :]
    mean, se = _combine(payoff, McConfig(config.n_paths, config.steps_per_window, config.seed, config.antithetic))
    disc = math.exp(-market.rate * horizon)
    return McEstimate(disc * float(mean), disc * float(se), config.n_paths, "none")
