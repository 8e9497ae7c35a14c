"""
Riesz kernel factors |x - u|^(alpha - n) on a uniform cell partition, and the
dyadic cone index of a pair of factor distances.

Distinct cells use the center-to-center value. The self cell uses the exact
cell average of the (locally integrable) kernel.
"""

import logging
import math
from dataclasses import dataclass
from enum import StrEnum
from functools import cache

import numpy as np

from helpers import config
from helpers.exceptions import NotInAnyConeError, ValidationError
from helpers.grid import Factor, ProductGrid

logger = logging.getLogger(__name__)


class SelfCellRule(StrEnum):
    """How the diagonal (self-cell) kernel value is obtained."""

    ANALYTIC_1D = "ANALYTIC_1D"
    REFINED_SUBGRID = "REFINED_SUBGRID"
    DROP = "DROP"


def validate_order(alpha: float, dim: int, name: str = "alpha") -> None:
    """0 < alpha < dim."""
    if not (math.isfinite(alpha) and 0.0 < alpha < dim):
        raise ValidationError(f"{name} must lie in (0, {dim}), got {alpha!r}")


def default_rule(dim: int) -> SelfCellRule:
    return SelfCellRule.ANALYTIC_1D if dim == 1 else SelfCellRule.REFINED_SUBGRID


@dataclass(frozen=True)
class KernelSpec:
    """Kernel exponents of both factors and the self-cell rule."""

    alpha: float
    n: int
    beta: float
    m: int
    self_cell_rule: SelfCellRule | None = None

    def __post_init__(self):
        validate_order(self.alpha, self.n, "alpha")
        validate_order(self.beta, self.m, "beta")

    def order(self, factor: Factor) -> float:
        return self.alpha if factor == Factor.FIRST else self.beta

    def dim(self, factor: Factor) -> int:
        return self.n if factor == Factor.FIRST else self.m

    def rule(self, factor: Factor) -> SelfCellRule:
        return self.self_cell_rule or default_rule(self.dim(factor))


# --------------------------------------------------------------------
# Self-cell averages
# --------------------------------------------------------------------
def self_cell_average(widths, alpha: float, rule: SelfCellRule) -> float:
    """
    (1/|B|) * integral over B of |t|^(alpha - N) dt, B the centered box with the given widths.

    ANALYTIC_1D needs N = 1. REFINED_SUBGRID works in any dimension and for
    non-cubic boxes. DROP returns 0 (drop-diagonal sensitivity variant).
    """
    widths = tuple(float(w) for w in widths)
    dim = len(widths)
    validate_order(alpha, dim)

    if rule == SelfCellRule.DROP:
        return 0.0

    if rule == SelfCellRule.ANALYTIC_1D:
        if dim != 1:
            raise ValidationError(f"ANALYTIC_1D self-cell rule needs dimension 1, got {dim}")
        h = widths[0]
        return (1.0 / h) * 2.0 * (h / 2.0) ** alpha / alpha

    return _refined_self_average(widths, alpha)


@cache
def _refined_self_average(widths: tuple[float, ...], alpha: float) -> float:
    """
    Self-similar refinement on a 4^N subgrid.

    The central 2^N subcells form the half-scale copy of the box, whose
    integral is 2^-alpha times the box integral. The outer ring is integrated
    with tensor Gauss-Legendre; the central copy is expanded recursively until
    its ring contribution drops below SUBGRID_TRUNCATION of the running sum.
    """
    dim = len(widths)
    w = np.asarray(widths)
    sub = w / 4.0

    nodes, gweights = np.polynomial.legendre.leggauss(config.SUBGRID_GAUSS_POINTS)
    unit_nodes = 0.5 * (nodes + 1.0)
    unit_weights = 0.5 * gweights

    # tensor rule on the unit cube
    grids = np.meshgrid(*([unit_nodes] * dim), indexing="ij")
    points = np.stack([g.reshape(-1) for g in grids], axis=1)
    wgrids = np.meshgrid(*([unit_weights] * dim), indexing="ij")
    point_weights = np.prod(np.stack([g.reshape(-1) for g in wgrids], axis=1), axis=1)

    ring = 0.0
    for index in np.ndindex(*([4] * dim)):
        if all(i in (1, 2) for i in index):
            continue
        lower = -w / 2.0 + np.asarray(index) * sub
        xs = lower + points * sub
        r = np.sqrt(np.sum(xs * xs, axis=1))
        ring += float(np.prod(sub)) * float(np.dot(point_weights, r ** (alpha - dim)))

    contraction = 2.0 ** (-alpha)
    total = 0.0
    term = ring
    levels = 0
    while True:
        total += term
        levels += 1
        if term < config.SUBGRID_TRUNCATION * total:
            break
        term *= contraction

    logger.debug("Refined self-cell average: %d levels, widths=%s", levels, widths)
    return total / float(np.prod(w))


# --------------------------------------------------------------------
# Kernel factor
# --------------------------------------------------------------------
def kernel_factor(
    center_a,
    center_b,
    cell_volume: float,
    alpha: float,
    n: int,
    self_cell_rule: SelfCellRule | None = None,
) -> float:
    """|a - b|^(alpha - n) for distinct cells, the exact cell average for the self cell."""
    validate_order(alpha, n)
    a = np.atleast_1d(np.asarray(center_a, dtype=np.float64))
    b = np.atleast_1d(np.asarray(center_b, dtype=np.float64))
    distance = float(np.sqrt(np.sum((a - b) ** 2)))
    if distance > 0.0:
        return distance ** (alpha - n)
    h = cell_volume ** (1.0 / n)
    return self_cell_average((h,) * n, alpha, self_cell_rule or default_rule(n))


def squared_offsets(grid: ProductGrid, factor: Factor) -> np.ndarray:
    """Integer squared cell-offset norms between all cells of one factor."""
    idx = grid.indices(factor)
    diff = idx[:, None, :] - idx[None, :, :]
    return np.sum(diff * diff, axis=2)


def kernel_matrix(
    grid: ProductGrid,
    factor: Factor,
    alpha: float,
    rule: SelfCellRule | None = None,
) -> np.ndarray:
    """Matrix of kernel_factor over all cell pairs of one factor (without cell volume)."""
    dim = grid.dim(factor)
    validate_order(alpha, dim)
    rule = rule or default_rule(dim)
    offsets = squared_offsets(grid, factor)
    h = grid.step(factor)
    distances = h * np.sqrt(offsets)
    with np.errstate(divide="ignore"):
        matrix = np.where(offsets > 0, distances ** (alpha - dim), 0.0)
    np.fill_diagonal(matrix, self_cell_average((h,) * dim, alpha, rule))
    return matrix


def joint_kernel_matrix(grid: ProductGrid, order: float) -> np.ndarray:
    """
    (|x-u|^2 + |y-v|^2)^((order - n - m)/2) over all product-cell pairs.

    The self pair uses the refined average over the product cell.
    """
    dim = grid.n + grid.m
    validate_order(order, dim, "alpha + beta")
    dx2 = grid.h_x**2 * squared_offsets(grid, Factor.FIRST)
    dy2 = grid.h_y**2 * squared_offsets(grid, Factor.SECOND)
    r2 = (dx2[:, None, :, None] + dy2[None, :, None, :]).reshape(grid.size, grid.size)
    with np.errstate(divide="ignore"):
        matrix = np.where(r2 > 0, r2 ** ((order - dim) / 2.0), 0.0)
    widths = (grid.h_x,) * grid.n + (grid.h_y,) * grid.m
    np.fill_diagonal(matrix, self_cell_average(widths, order, SelfCellRule.REFINED_SUBGRID))
    return matrix


# --------------------------------------------------------------------
# Cones
# --------------------------------------------------------------------
# sentinel label for pairs excluded from every cone
NOT_IN_CONE = np.iinfo(np.int64).min


def cone_index(dx_norm: float, dy_norm: float) -> int:
    """
    The unique ell with 2^-ell <= dx/dy < 2^(-ell+1).

    Exact at dyadic ratios (frexp reads the binary exponent).
    """
    if not dx_norm > 0.0 or not dy_norm > 0.0:
        raise NotInAnyConeError(f"pair with distances ({dx_norm}, {dy_norm}) lies in no cone")
    _, exponent = math.frexp(dx_norm / dy_norm)
    return 1 - exponent


def cone_index_squared(dx_sq: np.ndarray, dy_sq: np.ndarray) -> np.ndarray:
    """
    Vectorized cone_index from squared distances.

    Entries with a vanishing distance are returned as NOT_IN_CONE.
    """
    dx_sq = np.asarray(dx_sq, dtype=np.float64)
    dy_sq = np.asarray(dy_sq, dtype=np.float64)
    inside = (dx_sq > 0) & (dy_sq > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio_sq = np.where(inside, dx_sq / np.where(dy_sq > 0, dy_sq, 1.0), 1.0)
    _, exponent = np.frexp(ratio_sq)
    ell = -((exponent.astype(np.int64) - 1) // 2)
    return np.where(inside, ell, NOT_IN_CONE)


def cone_labels(grid: ProductGrid) -> np.ndarray:
    """
    Cone index of every product-cell pair, shape (size, size), rows = outputs (x, y),
    columns = inputs (u, v); NOT_IN_CONE where |x-u| = 0 or |y-v| = 0.
    """
    dx2 = grid.h_x**2 * squared_offsets(grid, Factor.FIRST)
    dy2 = grid.h_y**2 * squared_offsets(grid, Factor.SECOND)
    labels = cone_index_squared(dx2[:, None, :, None], dy2[None, :, None, :])
    return labels.reshape(grid.size, grid.size)
