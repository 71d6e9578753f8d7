"""Numerical defaults shared by the library and the command line.

Every knob the CLI exposes has its default here and nowhere else.
"""

# Sine-series truncation cap; the adaptive rule may stop earlier.
K_MAX = 64
# Gauss-Legendre nodes per one-dimensional integral.
QUAD_NODES = 128
# Relative size of the last retained mode after barrier decay.
MODE_CUTOFF = 1e-14

# Transformed gaps shorter than this are merged into the neighbouring windows.
MIN_GAP = 1e-12
# Window endpoints closer than this (in years) count as adjacent.
ADJACENCY_TOL = 1e-12
# Gaussian integrals are cut at |y| <= GAUSS_CUT; e^{-GAUSS_CUT^2/2} ~ 2e-22.
GAUSS_CUT = 10.0

# Monte Carlo
N_PATHS = 200_000
STEPS_PER_WINDOW = 2048
SEED = 42
BATCH_PATHS = 2048

# Moment recovery
CLIP_TOL = 1e-7
INFEASIBLE_TOL = 1e-6
CONDITION_LIMIT = 1e12

SCHEMA_VERSION = "1.0"
ENV_PREFIX = "MULTIBARRIER_"
