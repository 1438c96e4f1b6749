"""Pinned physical constants and statistical decision thresholds.

Everything that is a tolerance or a test constant lives here so it can be
audited in one place. Physical constants are SI.
"""
import math

# Planck units and conversions (SI)
PLANCK_LENGTH_M = 1.616255e-35
PLANCK_TIME_S = 5.391247e-44
SPEED_OF_LIGHT_M_S = 2.99792458e8
SECONDS_PER_YEAR = 365.25 * 86400.0
TEN_BILLION_YEARS_S = 1e10 * SECONDS_PER_YEAR

# Fock-space bookkeeping
LEAKAGE_TOL = 1e-8
RESCALE_LOW = 1e-6
RESCALE_HIGH = 1e6
MAX_N_MAX = 4096

# Quadrature
QUAD_ABS_TOL = 1e-10
QUAD_REL_TOL = 1e-10
WINDOW_SIGMAS = 12.0
DEFAULT_R = 5

# Ensemble statistics
N_BATCHES = 20
SIGMA_BAND = 3.0
ESS_MIN = 50.0
MIN_RECORDS = 100
POOR_FIT_RESIDUAL = 0.20

# Kolmogorov-Smirnov
KS_ALPHA = 0.01


def ks_coefficient(alpha: float = KS_ALPHA) -> float:
    """Asymptotic Kolmogorov critical coefficient c(alpha); 1.6276 at 1%."""
    return math.sqrt(-0.5 * math.log(alpha / 2.0))
