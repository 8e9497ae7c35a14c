"""Module for general configurations of the numerics and the command runner"""

import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

# ----------------------
# Exit codes
# ----------------------
EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_GUARD = 3

# ----------------------
# Concurrency settings
# ----------------------
MAX_CONCURRENCY = int(os.getenv("FRACINT_THREADS", "4"))  # tune to the number of cores

LOG_LEVEL = os.getenv("FRACINT_LOG_LEVEL", "INFO")

# ----------------------
# Numerical tolerances
# ----------------------
RECONSTRUCTION_TOL = 1e-12
ORACLE_TOL = 1e-10
HOLDER_SLACK = 1e-9
DILATION_TOL = 1e-6
SUBGRID_TRUNCATION = 1e-14

# Gauss-Legendre points per axis on each ring subcell of the refined self-cell rule
SUBGRID_GAUSS_POINTS = 10

# Direct (quadruple-sum) evaluation is O(P^2) in the number P of product cells.
# 1024 product cells is 32 cells per axis at n = m = 1.
ORACLE_MAX_PRODUCT_CELLS = 1024

# ----------------------
# Defaults for a desk-scale run
# ----------------------
DEFAULT_GRID = {
    "n": 1,
    "m": 1,
    "extent_x": 1.0,
    "extent_y": 1.0,
    "cells_x": 8,
    "cells_y": 8,
}

DEFAULT_EXPONENTS = {
    "alpha": 0.5,
    "beta": 0.5,
    "p": 2.0,
    "q": 2.0,
    "theta": 3.0,
    "t": 2.0,
}

DEFAULT_POWER_WEIGHTS = {
    "a": 0.15,
    "b": 0.15,
    "c": 0.1,
    "d": 0.1,
}

DEFAULT_SEED = 20240601

# ----------------------
# Calibration
# ----------------------
CALIBRATION_PATH = Path(
    os.getenv(
        "FRACINT_CALIBRATION_PATH",
        Path(__file__).resolve().parent.parent / "calibration" / "constants.json",
    )
)

# Measured constants are frozen with this multiplicative head-room
CALIBRATION_MARGIN = 1.5

# Refinement drift allowed for the two-weight ratio over the characteristic
RATIO_DRIFT_LIMIT = 0.2

# Upper bound on the RMS residual (log2 scale) of an accepted decay fit
FIT_RESIDUAL_LIMIT = 0.5
