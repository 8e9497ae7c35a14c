"""
Weighted norms, two-weight ratios and decay profiles over cone eccentricities.

Operator norms are probed from below by finite test corpora; characteristics
are computed exactly on the lattice family. Decay rates are estimated by a
log-linear least-squares fit of a profile against -|ell|.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import StrEnum

import numpy as np
import pandas as pd

from helpers import config
from helpers.characteristic import WeightPair, b_ratio_probe, bump_characteristic_sup
from helpers.exceptions import EmptyFamilyError, FitError, TrivialWeightError, ValidationError
from helpers.grid import (
    ExponentConfig,
    Factor,
    GridFunction,
    ProductGrid,
    RectangleFilter,
    enumerate_dyadic_rectangles,
)
from helpers.kernel import SelfCellRule
from helpers.operators import (
    check_guard,
    cone_operator,
    cone_operator_batch,
    strong_fractional_integral,
    strong_fractional_integral_batch,
)

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["ell", "quantity", "kind"]
MIN_FIT_ENTRIES = 3


class QuantityKind(StrEnum):
    CHARACTERISTIC = "CHARACTERISTIC"
    NORM_RATIO = "NORM_RATIO"


class CorpusKind(StrEnum):
    DYADIC_INDICATORS = "DYADIC_INDICATORS"
    RANDOM = "RANDOM"
    SINGLE_CELLS = "SINGLE_CELLS"


@dataclass(frozen=True)
class DecayReport:
    """A per-eccentricity profile and, once fitted, its decay rate."""

    ell_values: tuple[int, ...]
    quantities: tuple[float, ...]
    quantity_kind: QuantityKind
    fitted_eps: float | None = None
    fit_residual: float | None = None
    dropped: tuple[dict, ...] = ()

    def __post_init__(self):
        if len(self.ell_values) != len(self.quantities):
            raise ValidationError(
                f"{len(self.ell_values)} ell values against {len(self.quantities)} quantities"
            )

    def quantity_at(self, ell: int) -> float:
        return self.quantities[self.ell_values.index(ell)]

    def to_dict(self) -> dict:
        return {
            "ell_values": [int(e) for e in self.ell_values],
            "quantities": [float(q) for q in self.quantities],
            "quantity_kind": self.quantity_kind.value,
            "fitted_eps": None if self.fitted_eps is None else float(self.fitted_eps),
            "fit_residual": None if self.fit_residual is None else float(self.fit_residual),
            "dropped": list(self.dropped),
        }

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "ell": list(self.ell_values),
                "quantity": list(self.quantities),
                "kind": self.quantity_kind.value,
            },
            columns=REPORT_COLUMNS,
        )


@dataclass(frozen=True, eq=False)
class TestCorpus:
    """Non-negative, non-zero probe functions on one grid."""

    __test__ = False

    functions: tuple[GridFunction, ...]
    description: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if not self.functions:
            raise ValidationError("a test corpus needs at least one function")
        grid = self.functions[0].grid
        for f in self.functions:
            if f.grid != grid:
                raise ValidationError("corpus functions live on different grids")
            if np.any(f.values < 0.0) or not np.any(f.values):
                raise ValidationError("corpus functions must be non-negative and not identically zero")

    @property
    def grid(self) -> ProductGrid:
        return self.functions[0].grid

    def __len__(self) -> int:
        return len(self.functions)

    def stack(self) -> np.ndarray:
        """Values as (len, size)."""
        return np.stack([f.values for f in self.functions])


# --------------------------------------------------------------------
# Corpora
# --------------------------------------------------------------------
def _capped(items: list, count: int | None) -> list:
    return items if count is None else items[:count]


def build_corpus(
    grid: ProductGrid,
    kind: CorpusKind | str,
    count: int | None = None,
    seed: int = config.DEFAULT_SEED,
) -> TestCorpus:
    """
    Deterministic probe corpus.

    DYADIC_INDICATORS and SINGLE_CELLS enumerate their whole family when count
    is None and keep the first `count` otherwise. RANDOM draws `count` i.i.d.
    uniform(0, 1] fields.
    """
    kind = CorpusKind(kind)
    if count is not None and count < 1:
        raise ValidationError(f"corpus count must be at least 1, got {count}")

    if kind == CorpusKind.DYADIC_INDICATORS:
        functions, labels = [], []
        for r in _capped(enumerate_dyadic_rectangles(grid), count):
            block = np.zeros(grid.shape)
            block[r.slices] = 1.0
            functions.append(GridFunction(grid, block))
            labels.append(f"indicator q={r.q_corner}/{r.q_side} p={r.p_corner}/{r.p_side}")

    elif kind == CorpusKind.SINGLE_CELLS:
        functions, labels = [], []
        for cell in _capped(list(range(grid.size)), count):
            values = np.zeros(grid.size)
            values[cell] = 1.0
            functions.append(GridFunction(grid, values))
            labels.append(f"cell {cell}")

    else:
        if count is None:
            raise ValidationError("a RANDOM corpus needs a count")
        rng = np.random.default_rng(seed)
        # 1 - [0, 1) is (0, 1]
        draws = 1.0 - rng.random((count, grid.size))
        functions = [GridFunction(grid, row) for row in draws]
        labels = [f"random seed={seed} #{i}" for i in range(count)]

    logger.debug("Built %s corpus with %d functions", kind.value, len(functions))
    return TestCorpus(tuple(functions), tuple(labels))


# --------------------------------------------------------------------
# Norms and ratios
# --------------------------------------------------------------------
def weighted_norm(g: GridFunction, w: GridFunction, p: float) -> float:
    """(sum over cells of |g w|^p * cell volume)^(1/p)."""
    if p < 1.0:
        raise ValidationError(f"p must be at least 1, got {p!r}")
    if g.grid != w.grid:
        raise ValidationError("function and weight live on different grids")
    return float(np.sum(np.abs(g.values * w.values) ** p) * g.grid.cell_volume) ** (1.0 / p)


def weighted_norms(stack: np.ndarray, w: GridFunction, p: float) -> np.ndarray:
    """weighted_norm of every row of a (k, size) stack."""
    return (np.sum(np.abs(stack * w.values[None, :]) ** p, axis=1) * w.grid.cell_volume) ** (1.0 / p)


def _rhs_norms(corpus: TestCorpus, w: WeightPair, p: float) -> np.ndarray:
    rhs = weighted_norms(corpus.stack(), w.sigma, p)
    if np.any(rhs == 0.0):
        raise TrivialWeightError("sigma vanishes on the support of a corpus function")
    return rhs


def inequality_ratio(
    f: GridFunction,
    w: WeightPair,
    cfg: ExponentConfig,
    rule: SelfCellRule | None = None,
) -> dict:
    """||omega I f||_p / ||f sigma||_p."""
    rhs_norm = weighted_norm(f, w.sigma, cfg.p)
    if rhs_norm == 0.0:
        raise TrivialWeightError("||f sigma||_p vanishes")
    lhs = weighted_norm(strong_fractional_integral(f, cfg, rule).result, w.omega, cfg.p)
    return {"lhs": lhs, "rhs_norm": rhs_norm, "ratio": lhs / rhs_norm}


def max_inequality_ratio(
    corpus: TestCorpus,
    w: WeightPair,
    cfg: ExponentConfig,
    rule: SelfCellRule | None = None,
) -> dict:
    """Largest inequality_ratio over the corpus and the member attaining it."""
    rhs = _rhs_norms(corpus, w, cfg.p)
    images = strong_fractional_integral_batch(corpus.grid, cfg, corpus.stack(), rule)
    ratios = weighted_norms(images, w.omega, cfg.p) / rhs
    index = int(np.argmax(ratios))
    return {"ratio": float(ratios[index]), "index": index, "description": corpus.description[index]}


# --------------------------------------------------------------------
# Profiles
# --------------------------------------------------------------------
def _ell_list(ell_range: tuple[int, int]) -> list[int]:
    ell_min, ell_max = ell_range
    if ell_min > ell_max:
        raise ValidationError(f"empty ell range [{ell_min}, {ell_max}]")
    return list(range(int(ell_min), int(ell_max) + 1))


def cone_norm_profile(
    w: WeightPair,
    cfg: ExponentConfig,
    ell_range: tuple[int, int],
    corpus: TestCorpus,
    rule: SelfCellRule | None = None,
) -> DecayReport:
    """Per ell, the largest ||omega Delta_ell I f||_p / ||f sigma||_p over the corpus."""
    if corpus.grid != w.grid:
        raise ValidationError("corpus and weights live on different grids")
    check_guard(w.grid)
    rhs = _rhs_norms(corpus, w, cfg.p)
    stack = corpus.stack()

    ells, quantities = [], []
    for ell in _ell_list(ell_range):
        images = cone_operator_batch(w.grid, cfg, ell, stack, rule)
        quantity = float(np.max(weighted_norms(images, w.omega, cfg.p) / rhs))
        logger.debug("Cone %d: norm ratio %.6g", ell, quantity)
        ells.append(ell)
        quantities.append(quantity)
    return DecayReport(tuple(ells), tuple(quantities), QuantityKind.NORM_RATIO)


def characteristic_decay_profile(
    w: WeightPair,
    cfg: ExponentConfig,
    t: float,
    ell_range: tuple[int, int],
) -> DecayReport:
    """Per ell, the characteristic supremum over rectangles of eccentricity ell."""
    if not 1.0 < t < cfg.theta:
        raise ValidationError(f"profile bump exponent must lie in (1, theta={cfg.theta}), got {t!r}")

    ells, quantities, dropped = [], [], []
    for ell in _ell_list(ell_range):
        try:
            report = bump_characteristic_sup(w, cfg, t, RectangleFilter.eccentricity(ell))
        except EmptyFamilyError as e:
            logger.warning("Dropping ell=%d from the characteristic profile: %s", ell, e)
            dropped.append({"ell": ell, "reason": str(e)})
            continue
        ells.append(ell)
        quantities.append(report.value)
    return DecayReport(tuple(ells), tuple(quantities), QuantityKind.CHARACTERISTIC, dropped=tuple(dropped))


def fit_decay_rate(report: DecayReport) -> DecayReport:
    """
    Least-squares slope of log2(quantity) against -|ell|.

    Only entries with |ell| >= 1 and a positive quantity take part.
    """
    ells = np.asarray(report.ell_values, dtype=np.float64)
    quantities = np.asarray(report.quantities, dtype=np.float64)
    usable = (np.abs(ells) >= 1) & (quantities > 0.0)
    if usable.sum() < MIN_FIT_ENTRIES:
        raise FitError(f"{int(usable.sum())} usable profile entries, need {MIN_FIT_ENTRIES}")

    x = -np.abs(ells[usable])
    if np.unique(x).size < 2:
        raise FitError("all usable entries share one |ell|, the slope is undetermined")
    y = np.log2(quantities[usable])
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))

    logger.info("Fitted decay rate %.6g (rms residual %.3g, %d entries)", slope, residual, int(usable.sum()))
    return replace(report, fitted_eps=float(slope), fit_residual=residual)


def eccentric_bound_profile(
    w: WeightPair,
    cfg: ExponentConfig,
    ell_range: tuple[int, int],
) -> dict:
    """
    Per ell > 0, the theta-characteristic of eccentricity ell divided by
    2^(-ell (alpha - n/theta)) times the diagonal theta-characteristic.

    On square grids with equal steps every such rectangle sits in a diagonal
    rectangle of the lattice, so the normalized values stay at or below 1.
    """
    theta = cfg.theta
    diagonal = bump_characteristic_sup(w, cfg, theta, RectangleFilter.diagonal()).value
    exponent = cfg.alpha - cfg.n / theta
    rows = []
    for ell in _ell_list(ell_range):
        if ell <= 0:
            continue
        try:
            value = bump_characteristic_sup(w, cfg, theta, RectangleFilter.eccentricity(ell)).value
        except EmptyFamilyError:
            logger.warning("No rectangles of eccentricity %d on this grid", ell)
            continue
        rows.append({"ell": ell, "value": value, "normalized": value / (2.0 ** (-ell * exponent) * diagonal)})
    return {
        "diagonal": diagonal,
        "exponent": exponent,
        "rows": rows,
        "constant": max((r["normalized"] for r in rows), default=0.0),
    }


def ratio_hypothesis_scan(
    w: WeightPair,
    cfg: ExponentConfig,
    t: float,
    ell: int,
    slack: float = 1.0,
) -> dict:
    """b_ratio_probe on every rectangle whose first factor can shrink by 2^ell."""
    cfg.check_bump(t)
    worst, worst_rect, probes, holds = 0.0, None, 0, True
    for r in enumerate_dyadic_rectangles(w.grid):
        if r.q_side < (1 << ell):
            continue
        probe = b_ratio_probe(w, r, cfg.p, t, ell, cfg.alpha, slack)
        probes += 1
        holds = holds and probe["holds"]
        if probe["ratio"] / probe["bound"] > worst:
            worst, worst_rect = probe["ratio"] / probe["bound"], r
    if probes == 0:
        raise EmptyFamilyError(f"no rectangle can shrink by 2^{ell} in the first factor")
    return {
        "probes": probes,
        "worst_ratio_over_bound": worst,
        "worst_rectangle": worst_rect.to_dict(),
        "holds": holds,
    }


def cone_dilation_sides(
    f: GridFunction,
    weights,
    cfg: ExponentConfig,
    ell: int,
    p: float,
    factor: Factor = Factor.FIRST,
    rule: SelfCellRule | None = None,
) -> tuple[float, float]:
    """
    Both sides of the change of variables behind the cone dilation estimate.

    FIRST, ell > 0:   ||omega Delta_ell I f||_p
                      = 2^(-ell (alpha + n/p)) ||omega(2^-ell x, y) Delta_0 I f(2^-ell x, y)||_p
    SECOND, ell <= 0: the mirrored identity with 2^(ell (beta + m/p)).

    The right-hand side lives on the grid whose dilated factor box is scaled by
    2^ell (resp. 2^-ell); f keeps its cell values there.
    """
    grid = f.grid
    if factor == Factor.FIRST:
        if ell <= 0:
            raise ValidationError("first-factor cone dilation needs ell > 0")
        dilated = grid.dilated(-ell, Factor.FIRST)
        scale_x, scale_y = 2.0 ** (-ell), 1.0
        gain = 2.0 ** (-ell * (cfg.alpha + cfg.n / p))
    else:
        if ell > 0:
            raise ValidationError("second-factor cone dilation needs ell <= 0")
        dilated = grid.dilated(ell, Factor.SECOND)
        scale_x, scale_y = 1.0, 2.0**ell
        gain = 2.0 ** (ell * (cfg.beta + cfg.m / p))

    omega = weights.sample(grid).omega
    lhs = weighted_norm(cone_operator(f, cfg, ell, rule).result, omega, p)

    moved = f.on(dilated)
    omega_moved = weights.sample(dilated, scale_x, scale_y).omega
    rhs = gain * weighted_norm(cone_operator(moved, cfg, 0, rule).result, omega_moved, p)
    return lhs, rhs
