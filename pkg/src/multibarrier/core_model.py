"""Contract data and the Black-Scholes to heat-equation change of variables.

With ``x = log(S / b_low)`` and ``tau = sigma^2 (T_end - t) / 2`` the value of
a barrier digital is ``exp(alpha x + beta tau) U(x, tau)`` where ``U`` solves
the heat equation, with Dirichlet conditions at ``x = 0`` and ``x = L`` while a
barrier window is active.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from multibarrier.constants import ADJACENCY_TOL, MIN_GAP


@dataclass(frozen=True)
class MarketParams:
    """Risk-neutral GBM parameters; rate and vol are annualized."""

    spot: float
    rate: float
    vol: float

    def __post_init__(self):
        for name in ("spot", "rate", "vol"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value}")


@dataclass(frozen=True)
class BarrierSpec:
    b_low: float
    b_up: float

    def __post_init__(self):
        if not (math.isfinite(self.b_low) and self.b_low > 0):
            raise ValueError(f"b_low must be positive, got {self.b_low}")
        if not (math.isfinite(self.b_up) and self.b_up > self.b_low):
            raise ValueError(f"b_up must exceed b_low, got b_low={self.b_low}, b_up={self.b_up}")

    @property
    def width(self) -> float:
        """Log-width ``L = log(b_up / b_low)``."""
        return math.log(self.b_up / self.b_low)

    def contains(self, spot: float) -> bool:
        return self.b_low < spot < self.b_up


@dataclass(frozen=True)
class BarrierSchedule:
    """Sorted, non-overlapping barrier windows given as ``(start, length)`` in years.

    Adjacent windows are allowed here; :func:`concatenate_windows` merges them.
    """

    windows: tuple[tuple[float, float], ...]

    def __init__(self, windows: Iterable[Sequence[float]]):
        ws = tuple((float(s), float(p)) for s, p in windows)
        object.__setattr__(self, "windows", ws)
        self._validate()

    def _validate(self):
        if not self.windows:
            raise ValueError("schedule needs at least one window")
        for start, length in self.windows:
            if not (math.isfinite(start) and start >= 0):
                raise ValueError(f"window start must be >= 0, got {start}")
            if not (math.isfinite(length) and length > 0):
                raise ValueError(f"window length must be > 0, got {length}")
        for (s0, p0), (s1, _) in zip(self.windows, self.windows[1:]):
            if s0 + p0 > s1 + ADJACENCY_TOL:
                raise ValueError(
                    f"windows overlap or are unsorted: [{s0}, {s0 + p0}] and start {s1}"
                )

    @classmethod
    def from_tenors(cls, tenors: Sequence[float], period: float) -> "BarrierSchedule":
        """Windows ``[T_i, T_i + period]`` for the given tenor dates."""
        return cls((t, period) for t in tenors)

    @classmethod
    def coupon_strip(cls, first: float, period: float, n: int) -> "BarrierSchedule":
        """``n`` adjacent windows of equal length starting at ``first``."""
        if n < 1:
            raise ValueError("n must be >= 1")
        return cls((first + i * period, period) for i in range(n))

    def __len__(self) -> int:
        return len(self.windows)

    @property
    def start(self) -> float:
        return self.windows[0][0]

    @property
    def end(self) -> float:
        s, p = self.windows[-1]
        return s + p

    def subset(self, indices: Iterable[int]) -> "BarrierSchedule":
        return BarrierSchedule(self.windows[i] for i in sorted(indices))

    def is_contiguous(self) -> bool:
        return all(
            abs(s0 + p0 - s1) <= ADJACENCY_TOL
            for (s0, p0), (s1, _) in zip(self.windows, self.windows[1:])
        )


def concatenate_windows(schedule: BarrierSchedule) -> BarrierSchedule:
    """Merge every maximal run of adjacent windows into a single window."""
    merged: list[list[float]] = []
    for start, length in schedule.windows:
        if merged and abs(merged[-1][0] + merged[-1][1] - start) <= ADJACENCY_TOL:
            merged[-1][1] = start + length - merged[-1][0]
        else:
            merged.append([start, length])
    return BarrierSchedule(merged)


def alpha_beta(rate: float, vol: float) -> tuple[float, float]:
    """Drift and discount constants of the heat-equation transform."""
    if not (rate > 0 and vol > 0):
        raise ValueError(f"rate and vol must be positive, got rate={rate}, vol={vol}")
    k = 2.0 * rate / vol**2
    alpha = -0.5 * (k - 1.0)
    beta = -k - alpha * alpha
    return alpha, beta


@dataclass(frozen=True)
class HeatCoords:
    """Valuation point and remaining barrier windows in heat coordinates.

    ``tau_images`` lists ``(tau_i, p_i)`` for each remaining window, earliest
    calendar window first, so ``tau_i`` decreases and the last entry has
    ``tau_i == 0``. ``tau_i`` is the image of the window's end date.
    """

    x: float
    tau: float
    alpha: float
    beta: float
    big_l: float
    tau_images: tuple[tuple[float, float], ...]
    t_end: float
    knocked_out: bool = False
    in_window: bool = False
    windows: tuple[tuple[float, float], ...] = field(default=(), compare=False)

    @property
    def final_gap(self) -> float:
        """Transformed time between the valuation point and the earliest window."""
        if not self.tau_images:
            return 0.0
        tau_1, p_1 = self.tau_images[0]
        return self.tau - (tau_1 + p_1)

    def gaps(self) -> list[float]:
        """Transformed free periods between consecutive remaining windows, latest first."""
        out = []
        imgs = self.tau_images
        for i in range(len(imgs) - 1, 0, -1):
            tau_i, p_i = imgs[i]
            out.append(imgs[i - 1][0] - (tau_i + p_i))
        return out


def _remaining_windows(schedule: BarrierSchedule, t: float) -> list[list[float]]:
    out = []
    for start, length in schedule.windows:
        end = start + length
        if end <= t:
            continue
        if start < t:
            start, length = t, end - t
        out.append([start, length])
    return out


def to_heat_coords(
    market: MarketParams,
    barriers: BarrierSpec,
    schedule: BarrierSchedule,
    t: float,
    spot_at_t: float,
) -> HeatCoords:
    """Map a valuation point and the remaining windows to heat coordinates.

    Windows ending at or before ``t`` are dropped (the price is conditional on
    the contract still being alive); a window containing ``t`` is clipped to
    start at ``t``. At ``t == T_end`` no window remains and ``tau_images`` is
    empty. Adjacent windows, and windows whose transformed gap is below
    ``MIN_GAP``, are merged. Window endpoints are closed: a spot on or outside
    a barrier while a window is active gives ``knocked_out=True``.
    """
    if not (spot_at_t > 0 and math.isfinite(spot_at_t)):
        raise ValueError(f"spot_at_t must be positive, got {spot_at_t}")
    if t < 0:
        raise ValueError(f"valuation time must be >= 0, got {t}")
    t_end = schedule.end
    if t > t_end:
        raise ValueError(f"valuation time {t} is after the last window end {t_end}")

    alpha, beta = alpha_beta(market.rate, market.vol)
    half_var = 0.5 * market.vol**2
    x = math.log(spot_at_t / barriers.b_low)
    tau = half_var * (t_end - t)

    concat = concatenate_windows(schedule)
    windows = _remaining_windows(concat, t)
    merged: list[list[float]] = []
    for start, length in windows:
        if merged and half_var * (start - merged[-1][0] - merged[-1][1]) < MIN_GAP:
            merged[-1][1] = start + length - merged[-1][0]
        else:
            merged.append([start, length])

    active = any(s - ADJACENCY_TOL <= t <= s + p + ADJACENCY_TOL for s, p in concat.windows)
    in_window = bool(merged) and merged[0][0] - t <= ADJACENCY_TOL
    knocked_out = active and not barriers.contains(spot_at_t)
    images = tuple(
        (half_var * (t_end - (s + p)), half_var * p) for s, p in merged
    )
    return HeatCoords(
        x=x,
        tau=tau,
        alpha=alpha,
        beta=beta,
        big_l=barriers.width,
        tau_images=images,
        t_end=t_end,
        knocked_out=knocked_out,
        in_window=in_window,
        windows=tuple((s, p) for s, p in merged),
    )


def from_heat_coords(
    coords: HeatCoords, market: MarketParams, barriers: BarrierSpec
) -> tuple[float, float]:
    """Inverse transform: ``(x, tau) -> (t, S)``."""
    t = coords.t_end - 2.0 * coords.tau / market.vol**2
    return t, barriers.b_low * math.exp(coords.x)
