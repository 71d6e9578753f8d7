"""Digital double-barrier options with many barrier periods under Black-Scholes.

The analytic pricer propagates a sine-series state through alternating
barrier windows and free periods; ``structure_floor`` turns those prices
into the law of the coupon count of a barrier-coupon note; ``corridor``
holds the occupation-time approximation; ``mc_oracle`` is the Monte Carlo
cross-check used by the tests and the ``verify`` command.
"""

from multibarrier.analytic import (
    FourierState,
    PriceResult,
    decay_through_barrier,
    diffuse_and_reproject,
    payoff_fourier_coeffs,
    price_multi_period,
    price_one_period,
    price_two_period_nested,
)
from multibarrier.core_model import (
    BarrierSchedule,
    BarrierSpec,
    HeatCoords,
    MarketParams,
    alpha_beta,
    concatenate_windows,
    from_heat_coords,
    to_heat_coords,
)
from multibarrier.corridor import approx_floor_via_corridor, occupation_convergence_experiment
from multibarrier.mc_oracle import (
    McConfig,
    McEstimate,
    estimate_bd_price,
    estimate_coupon_pmf,
    estimate_occupation_put,
    simulate_survival_indicators,
)
from multibarrier.structure_floor import (
    CouponPmf,
    MomentVector,
    moments_of_A,
    pmf_from_moments,
    price_structure_floor,
    surjection_coefficient,
)

__all__ = [
    "BarrierSchedule",
    "BarrierSpec",
    "CouponPmf",
    "FourierState",
    "HeatCoords",
    "MarketParams",
    "McConfig",
    "McEstimate",
    "MomentVector",
    "PriceResult",
    "alpha_beta",
    "approx_floor_via_corridor",
    "concatenate_windows",
    "decay_through_barrier",
    "diffuse_and_reproject",
    "estimate_bd_price",
    "estimate_coupon_pmf",
    "estimate_occupation_put",
    "from_heat_coords",
    "moments_of_A",
    "occupation_convergence_experiment",
    "payoff_fourier_coeffs",
    "pmf_from_moments",
    "price_multi_period",
    "price_one_period",
    "price_structure_floor",
    "price_two_period_nested",
    "simulate_survival_indicators",
    "surjection_coefficient",
    "to_heat_coords",
]
