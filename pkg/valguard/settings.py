"""
# Settings - constants and environment for valguard
# Every tunable lives here as a module-level constant
# Environment overrides are read from the process or a local .env file
"""

import os

from dotenv import load_dotenv

load_dotenv()

# Constants
SCHEMA_VERSION = 1

NIPALS_TOL = 1e-12
NIPALS_MAX_ITER = 500

LOO_MAX_ROWS = 25
DEFAULT_OUTER_FOLDS = 10
DEFAULT_INNER_FOLDS = 7

VIP_THRESHOLD = 1.0
SR_THRESHOLD = 1.0

WMC_WEIGHT_FP = 1.0
WMC_WEIGHT_FN = 100.0

DEFAULT_DPRIME = 1.466
SCORE_SLOPE = 4.0

# noise level of the informative-block simulation
FIG6_NOISE_SD = 1.0

LEAKAGE_WATERMARK = "INVALID — leakage demonstration"
DEFAULT_DISCLOSURE = (
    "single-block data split; independence holds only for operations after splitting"
)
REPEATED_CV_CAVEAT = (
    "repeated double-CV estimates share observations and are not independent; "
    "the paired test is reported without variance correction"
)
CORRELATION_CAVEAT = (
    "performance estimates are correlated within and between pipelines evaluated "
    "on the same splits"
)


def env_threads() -> int:
    """Worker thread count from VALGUARD_THREADS (default 1)."""
    raw = os.getenv("VALGUARD_THREADS", "").strip()
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        return 1
    return max(value, 1)


def env_quiet() -> bool:
    return os.getenv("VALGUARD_QUIET", "").strip().lower() in {"1", "true", "yes", "on"}
