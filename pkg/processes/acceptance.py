"""
Module with the verification checks run by `verify`.

Each check is a named, self-contained numerical experiment at desk scale.
Checks marked as calibrated compare a measured constant against the frozen
value in the calibration file; `verify --calibrate` re-measures those
constants and rewrites the file.
"""

import logging
import math
import time
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from helpers import config
from helpers.characteristic import bump_characteristic_sup, characteristic_dilation_sides
from helpers.exceptions import ValidationError
from helpers.grid import ExponentConfig, Factor, GridFunction, enumerate_dyadic_rectangles, make_grid
from helpers.kernel import NOT_IN_CONE, cone_index, cone_labels, squared_offsets
from helpers.operators import (
    achievable_cone_range,
    cone_operator,
    cone_sum,
    fractional_integral_at,
    strong_fractional_integral,
    strong_fractional_integral_direct,
)
from helpers.run_functions import read_json, write_json
from helpers.verify import (
    CorpusKind,
    DecayReport,
    QuantityKind,
    build_corpus,
    characteristic_decay_profile,
    cone_dilation_sides,
    cone_norm_profile,
    eccentric_bound_profile,
    fit_decay_rate,
    max_inequality_ratio,
)
from helpers.weights import PowerWeights, RandomWeights

logger = logging.getLogger(__name__)

CALIBRATED_KEYS = ("two_weight_ratio", "eccentric_bound", "norm_vs_characteristic")

HOLDER_LADDER = (1.1, 1.5, 2.0, 3.0)
ORACLE_RUNTIME_LIMIT = 5.0
EXACT_SINGULAR_VALUE = 2.0 * (math.sqrt(2.0) - 1.0)


@dataclass
class CheckResult:
    """Outcome of one check."""

    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "details": self.details}


@dataclass(frozen=True)
class Check:
    name: str
    description: str
    fn: Callable[[int, dict], tuple[bool, dict]]
    calibrated: bool = False

    def run(self, seed: int, constants: dict) -> CheckResult:
        started = time.perf_counter()
        try:
            passed, details = self.fn(seed, constants)
        # a crashing check is a failing check; the others still report
        except Exception as e:
            logger.error("Check %s raised %r", self.name, e)
            passed, details = False, {"error": repr(e)}
        seconds = time.perf_counter() - started
        logger.info("Check %s: %s in %.2fs", self.name, "passed" if passed else "FAILED", seconds)
        return CheckResult(self.name, bool(passed), details, seconds)


CHECKS: dict[str, Check] = {}


def check(name: str, description: str, calibrated: bool = False):
    """Register a check in inventory order."""

    def register(fn):
        CHECKS[name] = Check(name, description, fn, calibrated)
        return fn

    return register


def select_checks(names: list[str] | None) -> list[Check]:
    if not names:
        return list(CHECKS.values())
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise ValidationError(f"unknown checks: {', '.join(unknown)}; available: {', '.join(CHECKS)}")
    return [CHECKS[n] for n in names]


# --------------------------------------------------------------------
# Calibration file
# --------------------------------------------------------------------
def load_calibration(path: Path) -> dict:
    document = read_json(path)
    constants = document.get("constants", {}) if isinstance(document, dict) else {}
    missing = [k for k in CALIBRATED_KEYS if not isinstance(constants.get(k), int | float)]
    if missing:
        raise ValidationError(f"calibration file {path} lacks constants: {', '.join(missing)}")
    return document


# --------------------------------------------------------------------
# Shared settings
# --------------------------------------------------------------------
def _square_grid(cells: int, extent: float = 1.0):
    return make_grid(1, 1, extent, extent, cells, cells)


def _exponents(grid, alpha: float = 0.5, beta: float = 0.5, theta: float = 3.0) -> ExponentConfig:
    return ExponentConfig.for_grid(grid, alpha, beta, 2.0, theta=theta)


def _fixed_power_weights(a=None, b=None, c=None, d=None, delta: float = 0.125) -> PowerWeights:
    defaults = config.DEFAULT_POWER_WEIGHTS
    return PowerWeights(
        defaults["a"] if a is None else a,
        defaults["b"] if b is None else b,
        defaults["c"] if c is None else c,
        defaults["d"] if d is None else d,
        delta,
        delta,
    )


def _relative_gap(lhs: float, rhs: float) -> float:
    scale = max(abs(lhs), abs(rhs))
    return 0.0 if scale == 0.0 else abs(lhs - rhs) / scale


# --------------------------------------------------------------------
# Measurements shared by checks and calibration
# --------------------------------------------------------------------
def measure_two_weight_ratio(seed: int) -> dict:
    """Largest corpus ratio over the theta-characteristic on 8, 16 and 32 cells."""
    weights = _fixed_power_weights()
    ratios = {}
    for cells in (8, 16, 32):
        grid = _square_grid(cells)
        cfg = _exponents(grid)
        weights.validate(cfg, cfg.theta)
        w = weights.sample(grid)
        corpus = build_corpus(grid, CorpusKind.RANDOM, 150, seed)
        best = max_inequality_ratio(corpus, w, cfg)
        characteristic = bump_characteristic_sup(w, cfg, cfg.theta).value
        ratios[cells] = best["ratio"] / characteristic
        logger.debug("%d cells: ratio %.6g, characteristic %.6g", cells, best["ratio"], characteristic)
    values = list(ratios.values())
    drift = max(abs(b - a) / a for a, b in zip(values, values[1:], strict=False))
    return {"ratios": {str(k): v for k, v in ratios.items()}, "drift": drift, "measured": max(values)}


def _decay_case(alpha: float, a: float, c: float) -> dict:
    grid = _square_grid(16)
    cfg = _exponents(grid, alpha, alpha)
    weights = PowerWeights.for_grid(grid, a=a, b=a, c=c, d=c)
    weights.validate(cfg, cfg.theta)
    w = weights.sample(grid)
    report = fit_decay_rate(characteristic_decay_profile(w, cfg, 2.0, (-3, 3)))
    return {"grid": grid, "cfg": cfg, "w": w, "report": report}


def measure_eccentric_bound(case: dict | None = None) -> dict:
    """Eccentric characteristics against 2^(-ell (alpha - n/theta)) times the diagonal one."""
    case = case or _decay_case(0.5, config.DEFAULT_POWER_WEIGHTS["a"], config.DEFAULT_POWER_WEIGHTS["c"])
    cfg, report = case["cfg"], case["report"]
    bounds = eccentric_bound_profile(case["w"], cfg, (1, 3))
    exponent = bounds["exponent"]
    profile_ratio = max(
        report.quantity_at(ell) / (2.0 ** (-ell * exponent) * bounds["diagonal"])
        for ell in report.ell_values
        if ell > 0
    )
    return {
        "theta_profile": bounds["constant"],
        "t_profile": profile_ratio,
        "measured": max(bounds["constant"], profile_ratio),
    }


def measure_norm_vs_characteristic(seed: int) -> dict:
    grid = _square_grid(16)
    cfg = _exponents(grid)
    weights = PowerWeights.for_grid(grid)
    weights.validate(cfg, cfg.theta)
    w = weights.sample(grid)
    corpus = build_corpus(grid, CorpusKind.DYADIC_INDICATORS, seed=seed)
    norms = cone_norm_profile(w, cfg, (-4, 4), corpus)
    characteristics = characteristic_decay_profile(w, cfg, 2.0, (-4, 4))
    quotients = {
        ell: norms.quantity_at(ell) / characteristics.quantity_at(ell)
        for ell in characteristics.ell_values
        if ell in norms.ell_values
    }
    if not quotients:
        raise ValidationError("no eccentricity carries both a norm ratio and a characteristic")
    return {"quotients": {str(k): v for k, v in quotients.items()}, "measured": max(quotients.values())}


# --------------------------------------------------------------------
# Checks
# --------------------------------------------------------------------
@check("oracle_equivalence", "separable two-pass operator against the direct double sum on 8x8 and 16x16")
def check_oracle_equivalence(seed: int, constants: dict):
    started = time.perf_counter()
    worst = 0.0
    for cells in (8, 16):
        grid = _square_grid(cells)
        cfg = _exponents(grid)
        for f in build_corpus(grid, CorpusKind.RANDOM, 20, seed).functions:
            fast = strong_fractional_integral(f, cfg).result.values
            direct = strong_fractional_integral_direct(f, cfg).result.values
            worst = max(worst, float(np.linalg.norm(fast - direct) / np.linalg.norm(direct)))
    elapsed = time.perf_counter() - started
    passed = worst <= config.ORACLE_TOL and elapsed < ORACLE_RUNTIME_LIMIT
    return passed, {"max_relative_discrepancy": worst, "within_runtime_limit": elapsed < ORACLE_RUNTIME_LIMIT}


@check("singular_quadrature", "I_1/2 of the [0,1] indicator at x=2 converges as cells double 64->128->256")
def check_singular_quadrature(seed: int, constants: dict):
    errors = []
    for cells in (64, 128, 256):
        grid = make_grid(1, 1, 2.0, 1.0, cells, 1)
        f = GridFunction.sample(grid, lambda x, y: ((x[..., 0] >= 0.0) & (x[..., 0] <= 1.0)).astype(float))
        value = float(fractional_integral_at(f, 0.5, [2.0])[0, 0])
        errors.append(abs(value - EXACT_SINGULAR_VALUE))
    orders = [math.log2(a / b) for a, b in zip(errors, errors[1:], strict=False)]
    passed = min(orders) >= 1.0 and errors[-1] <= 1e-3
    return passed, {"errors": errors, "observed_orders": orders}


def _in_cone(dx2: int, dy2: int, ell: int) -> bool:
    """2^-ell <= dx/dy < 2^(1-ell) in exact integer arithmetic on squared offsets."""
    if ell >= 0:
        return dy2 <= dx2 * 4**ell < 4 * dy2
    return dy2 * 4 ** (-ell) <= dx2 < dy2 * 4 ** (1 - ell)


@check("cone_reconstruction", "cone partition of cell pairs and sum of partial operators on 8x8")
def check_cone_reconstruction(seed: int, constants: dict):
    grid = _square_grid(8)
    cfg = _exponents(grid)
    labels = cone_labels(grid)
    ox = squared_offsets(grid, Factor.FIRST)
    oy = squared_offsets(grid, Factor.SECOND)

    partition_errors = 0
    for out_x in range(grid.size_x):
        for out_y in range(grid.size_y):
            row = out_x * grid.size_y + out_y
            for in_x in range(grid.size_x):
                for in_y in range(grid.size_y):
                    dx2, dy2 = int(ox[out_x, in_x]), int(oy[out_y, in_y])
                    label = labels[row, in_x * grid.size_y + in_y]
                    if dx2 == 0 or dy2 == 0:
                        partition_errors += int(label != NOT_IN_CONE)
                        continue
                    scalar = cone_index(grid.h_x * math.sqrt(dx2), grid.h_y * math.sqrt(dy2))
                    partition_errors += int(scalar != label or not _in_cone(dx2, dy2, int(label)))

    f = build_corpus(grid, CorpusKind.RANDOM, 1, seed).functions[0]
    direct = strong_fractional_integral_direct(f, cfg).result.values
    lo, hi = achievable_cone_range(grid)
    parts = [cone_operator(f, cfg, ell) for ell in range(lo, hi + 1)]
    rebuilt = sum(p.result.values for p in parts) + parts[0].excluded.values
    scale = max(1.0, float(np.max(np.abs(direct))))
    gap = float(np.max(np.abs(rebuilt - direct))) / scale

    summed = cone_sum(f, cfg, lo, hi)
    sum_gap = float(np.max(np.abs(summed.result.values + summed.excluded.values - direct))) / scale
    residual = float(np.max(np.abs(summed.residual.values)))

    passed = (
        partition_errors == 0
        and gap <= config.RECONSTRUCTION_TOL
        and sum_gap <= config.RECONSTRUCTION_TOL
        and residual == 0.0
    )
    return passed, {
        "partition_errors": partition_errors,
        "cone_range": [lo, hi],
        "reconstruction_gap": gap,
        "cone_sum_gap": sum_gap,
        "out_of_range_residual": residual,
        "excluded_mass": summed.excluded_mass,
    }


@check("holder_monotonicity", "sup characteristic nondecreasing along t = 1.1, 1.5, 2.0, 3.0 for 20 random pairs")
def check_holder_monotonicity(seed: int, constants: dict):
    grid = _square_grid(8)
    cfg = _exponents(grid)
    violations = []
    for i in range(20):
        w = RandomWeights(seed + i).sample(grid)
        values = [bump_characteristic_sup(w, cfg, t).value for t in HOLDER_LADDER]
        for t_low, low, high in zip(HOLDER_LADDER, values, values[1:], strict=False):
            if low > high * (1.0 + config.HOLDER_SLACK):
                violations.append({"pair": i, "t": t_low, "low": low, "high": high})
    return not violations, {"pairs": 20, "ladder": list(HOLDER_LADDER), "violations": violations}


@check("dilation_covariance", "characteristic and cone-norm dilation identities for power weights")
def check_dilation_covariance(seed: int, constants: dict):
    grid = _square_grid(8)
    cfg = _exponents(grid)
    weights = _fixed_power_weights()
    t = 2.0

    worst_characteristic = 0.0
    for r in enumerate_dyadic_rectangles(grid):
        for ell, factor in ((1, Factor.FIRST), (2, Factor.FIRST), (-1, Factor.SECOND), (-2, Factor.SECOND)):
            lhs, rhs = characteristic_dilation_sides(weights, grid, r, cfg, t, ell, factor)
            worst_characteristic = max(worst_characteristic, _relative_gap(lhs, rhs))

    f = build_corpus(grid, CorpusKind.RANDOM, 1, seed).functions[0]
    worst_cone = 0.0
    for ell, factor in ((1, Factor.FIRST), (2, Factor.FIRST), (-1, Factor.SECOND), (-2, Factor.SECOND)):
        lhs, rhs = cone_dilation_sides(f, weights, cfg, ell, cfg.p, factor)
        worst_cone = max(worst_cone, _relative_gap(lhs, rhs))

    passed = worst_characteristic <= config.DILATION_TOL and worst_cone <= config.DILATION_TOL
    return passed, {"characteristic_gap": worst_characteristic, "cone_norm_gap": worst_cone}


@check(
    "two_weight_ratio",
    "corpus ratio over the theta-characteristic: refinement drift and frozen bound",
    calibrated=True,
)
def check_two_weight_ratio(seed: int, constants: dict):
    measured = measure_two_weight_ratio(seed)
    bound = float(constants["two_weight_ratio"])
    passed = measured["drift"] < config.RATIO_DRIFT_LIMIT and measured["measured"] <= bound
    return passed, {**measured, "bound": bound}


@check(
    "eccentric_decay",
    "characteristic profiles decay for alpha <= n/theta and alpha > n/theta; the latter under the frozen bound",
    calibrated=True,
)
def check_eccentric_decay(seed: int, constants: dict):
    low = _decay_case(0.3, 0.1, 0.05)
    high = _decay_case(0.5, config.DEFAULT_POWER_WEIGHTS["a"], config.DEFAULT_POWER_WEIGHTS["c"])
    bounds = measure_eccentric_bound(high)
    bound = float(constants["eccentric_bound"])

    details = {"bound": bound, **bounds}
    passed = bounds["measured"] <= bound
    for label, case in (("alpha_low", low), ("alpha_high", high)):
        report: DecayReport = case["report"]
        details[label] = {"fitted_eps": report.fitted_eps, "fit_residual": report.fit_residual}
        passed = passed and report.fitted_eps > 0.0 and report.fit_residual < config.FIT_RESIDUAL_LIMIT
    return passed, details


@check(
    "norm_vs_characteristic",
    "per-cone norm ratio over the eccentric characteristic on 16x16, ell in [-4, 4]",
    calibrated=True,
)
def check_norm_vs_characteristic(seed: int, constants: dict):
    measured = measure_norm_vs_characteristic(seed)
    bound = float(constants["norm_vs_characteristic"])
    return measured["measured"] <= bound, {**measured, "bound": bound}


@check("fit_self_test", "decay fit recovers an exact exponential and a 1%-noise one over 100 draws")
def check_fit_self_test(seed: int, constants: dict):
    ells = tuple(range(-4, 5))
    exact = DecayReport(ells, tuple(2.0 ** (-0.5 * abs(e)) for e in ells), QuantityKind.NORM_RATIO)
    exact_error = abs(fit_decay_rate(exact).fitted_eps - 0.5)

    rng = np.random.default_rng(seed)
    base = np.array([3.0 * 2.0 ** (-0.3 * abs(e)) for e in ells])
    worst_noisy = 0.0
    for _ in range(100):
        noisy = base * (1.0 + rng.uniform(-0.01, 0.01, base.size))
        fitted = fit_decay_rate(DecayReport(ells, tuple(noisy), QuantityKind.NORM_RATIO)).fitted_eps
        worst_noisy = max(worst_noisy, abs(fitted - 0.3))

    passed = exact_error <= 1e-9 and worst_noisy <= 0.05
    return passed, {"exact_error": exact_error, "worst_noisy_error": worst_noisy}


# --------------------------------------------------------------------
# Calibration
# --------------------------------------------------------------------
def calibrate(seed: int, path: Path) -> dict:
    """
    Re-measure the calibrated constants, apply config.CALIBRATION_MARGIN and
    rewrite the calibration file with the next version number.
    """
    try:
        version = int(read_json(path).get("version", 0))
    except ValidationError:
        version = 0

    measured = {
        "two_weight_ratio": measure_two_weight_ratio(seed)["measured"],
        "eccentric_bound": measure_eccentric_bound()["measured"],
        "norm_vs_characteristic": measure_norm_vs_characteristic(seed)["measured"],
    }
    document = {
        "version": version + 1,
        "seed": int(seed),
        "margin": config.CALIBRATION_MARGIN,
        "measured": measured,
        "constants": {k: v * config.CALIBRATION_MARGIN for k, v in measured.items()},
    }
    write_json(path, document)
    logger.info("Calibration version %d written to %s", version + 1, path)
    return document
