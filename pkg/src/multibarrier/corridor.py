"""Large-n approximation of the structure floor by an occupation-time put.

With ``n`` equal coupon windows tiling ``[0, T]``, the fraction of windows
the spot survives tends to the fraction of ``[0, T]`` it spends inside the
corridor, hence ``E(F - A)^+ ~ n E(F/n - occupation/T)^+``. Both sides are
kept as fractions of the horizon so the horizon need not be 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from multibarrier.core_model import BarrierSpec, MarketParams
from multibarrier.mc_oracle import McConfig, McEstimate, estimate_occupation_put, simulate_occupation


def approx_floor_via_corridor(
    market: MarketParams,
    barriers: BarrierSpec,
    horizon: float,
    n: int,
    floor: float,
    config: McConfig,
) -> McEstimate:
    """``n e^{-rT} E(F/n - occupation/T)^+`` by Monte Carlo, valued at time 0."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if floor < 0:
        raise ValueError(f"floor must be >= 0, got {floor}")
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    # n E(F/n - occ/T)^+ = (n/T) E(F T/n - occ)^+
    put = estimate_occupation_put(market, barriers, horizon, floor * horizon / n, config)
    scale = n / horizon
    return McEstimate(scale * put.mean, scale * put.std_error, put.n_paths, put.bias_note)


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    mean_gap: float
    std_error: float
    max_violation: float


def occupation_convergence_experiment(
    market: MarketParams,
    barriers: BarrierSpec,
    horizon: float,
    n_list: Sequence[int],
    config: McConfig,
) -> list[ConvergenceRow]:
    """Mean ``|A_n/n - occupation/T|`` per path for each ``n``, on one shared grid.

    The grid has ``steps_per_window`` steps rounded up to a multiple of every
    ``n``. ``max_violation`` is the largest ``A_n/n - occupation/T`` seen,
    which must not be positive.
    """
    n_list = list(n_list)
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be strictly increasing")
    lcm = math.lcm(*n_list)
    n_steps = lcm * max(1, -(-config.steps_per_window // lcm))
    occ, survived = simulate_occupation(market, barriers, horizon, n_steps, config, tuple(n_list))
    frac = occ / horizon
    rows = []
    for n in n_list:
        diff = survived[n] / n - frac
        gap = np.abs(diff)
        if config.antithetic:
            gap = 0.5 * (gap[0::2] + gap[1::2])
        se = float(gap.std(ddof=1) / math.sqrt(gap.size)) if gap.size > 1 else 0.0
        rows.append(ConvergenceRow(n, float(gap.mean()), se, float(diff.max())))
    return rows
