"""
Fractional integrals on a ProductGrid.

The strong operator has a product kernel, so the fast path applies the two
one-factor operators in turn. The direct path and the cone operators sum over
all product-cell pairs (O(P^2) for P product cells) with compensated
accumulation in row-major input order, and are guarded by
config.ORACLE_MAX_PRODUCT_CELLS.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from helpers import config
from helpers.exceptions import GuardExceededError, ValidationError
from helpers.grid import ExponentConfig, Factor, GridFunction, ProductGrid
from helpers.kernel import (
    NOT_IN_CONE,
    KernelSpec,
    SelfCellRule,
    cone_labels,
    joint_kernel_matrix,
    kernel_matrix,
    validate_order,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class OperatorOutput:
    """An operator result with its cone bookkeeping."""

    result: GridFunction
    excluded_mass: float = 0.0
    ell_range_used: tuple[int, int] | None = None
    excluded: GridFunction | None = None
    residual: GridFunction | None = None

    def metadata(self) -> dict:
        return {
            "excluded_mass": float(self.excluded_mass),
            "ell_range_used": list(self.ell_range_used) if self.ell_range_used else None,
        }


# --------------------------------------------------------------------
# Accumulation and guards
# --------------------------------------------------------------------
def compensated_apply(matrix: np.ndarray, columns: np.ndarray) -> np.ndarray:
    """
    matrix @ columns with Neumaier-compensated accumulation.

    Input cells are visited in row-major order; every output cell and every
    column accumulates independently, so the result does not depend on how
    the work is split.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    columns = np.asarray(columns, dtype=np.float64)
    if columns.ndim == 1:
        return compensated_apply(matrix, columns[:, None])[:, 0]

    total = np.zeros((matrix.shape[0], columns.shape[1]))
    compensation = np.zeros_like(total)
    for j in range(matrix.shape[1]):
        if not columns[j].any():
            continue
        term = matrix[:, j, None] * columns[j][None, :]
        running = total + term
        compensation += np.where(
            np.abs(total) >= np.abs(term),
            (total - running) + term,
            (term - running) + total,
        )
        total = running
    return total + compensation


def check_guard(grid: ProductGrid) -> None:
    if grid.size > config.ORACLE_MAX_PRODUCT_CELLS:
        raise GuardExceededError(
            f"{grid.size} product cells exceed the direct-evaluation guard of "
            f"{config.ORACLE_MAX_PRODUCT_CELLS}"
        )


def _check_config(f: GridFunction, cfg: ExponentConfig) -> None:
    if not cfg.matches(f.grid):
        raise ValidationError(
            f"exponents are for n={cfg.n}, m={cfg.m} but the grid has n={f.grid.n}, m={f.grid.m}"
        )


def kernel_spec(cfg: ExponentConfig, rule: SelfCellRule | None = None) -> KernelSpec:
    return KernelSpec(cfg.alpha, cfg.n, cfg.beta, cfg.m, rule)


def _factor_matrix(grid: ProductGrid, spec: KernelSpec, factor: Factor) -> np.ndarray:
    """One-factor kernel matrix including the cell volume of that factor."""
    matrix = kernel_matrix(grid, factor, spec.order(factor), spec.rule(factor))
    return matrix * grid.cell_volume_of(factor)


@lru_cache(maxsize=16)
def _product_matrix(grid: ProductGrid, spec: KernelSpec) -> np.ndarray:
    matrix = np.kron(_factor_matrix(grid, spec, Factor.FIRST), _factor_matrix(grid, spec, Factor.SECOND))
    matrix.setflags(write=False)
    return matrix


@lru_cache(maxsize=16)
def _labels(grid: ProductGrid) -> np.ndarray:
    labels = cone_labels(grid)
    labels.setflags(write=False)
    return labels


def achievable_cone_range(grid: ProductGrid) -> tuple[int, int]:
    """Smallest and largest cone index carried by some pair of the grid."""
    labels = _labels(grid)
    inside = labels[labels != NOT_IN_CONE]
    return int(inside.min()), int(inside.max())


# --------------------------------------------------------------------
# Separable path
# --------------------------------------------------------------------
def fractional_integral_1factor(
    f: GridFunction,
    alpha: float,
    axis: Factor,
    rule: SelfCellRule | None = None,
) -> GridFunction:
    """Midpoint discretization of the one-parameter fractional integral along one factor."""
    grid = f.grid
    validate_order(alpha, grid.dim(axis))
    kernel = kernel_matrix(grid, axis, alpha, rule) * grid.cell_volume_of(axis)
    values = f.as_matrix()
    if axis == Factor.FIRST:
        return f.with_values(kernel @ values)
    return f.with_values(values @ kernel.T)


def fractional_integral_at(
    f: GridFunction,
    alpha: float,
    points,
    axis: Factor = Factor.FIRST,
) -> np.ndarray:
    """
    The one-factor midpoint sum evaluated at off-grid targets.

    Returns shape (len(points), size of the other factor). Targets must not
    coincide with a cell center of the integrated factor.
    """
    grid = f.grid
    dim = grid.dim(axis)
    validate_order(alpha, dim)
    targets = np.asarray(points, dtype=np.float64).reshape(-1, dim)
    centers = grid.centers(axis)
    distances = np.sqrt(np.sum((targets[:, None, :] - centers[None, :, :]) ** 2, axis=2))
    if np.any(distances == 0.0):
        raise ValidationError("off-grid evaluation target coincides with a cell center")
    kernel = distances ** (alpha - dim) * grid.cell_volume_of(axis)
    values = f.as_matrix()
    return kernel @ values if axis == Factor.FIRST else kernel @ values.T


def strong_fractional_integral(
    f: GridFunction,
    cfg: ExponentConfig,
    rule: SelfCellRule | None = None,
) -> OperatorOutput:
    """I_{alpha beta} f as the FIRST pass followed by the SECOND pass."""
    _check_config(f, cfg)
    spec = kernel_spec(cfg, rule)
    first = fractional_integral_1factor(f, spec.alpha, Factor.FIRST, spec.rule(Factor.FIRST))
    both = fractional_integral_1factor(first, spec.beta, Factor.SECOND, spec.rule(Factor.SECOND))
    return OperatorOutput(result=both)


def strong_fractional_integral_batch(
    grid: ProductGrid,
    cfg: ExponentConfig,
    stack: np.ndarray,
    rule: SelfCellRule | None = None,
) -> np.ndarray:
    """Separable path for a stack of inputs, shape (k, size) -> (k, size)."""
    spec = kernel_spec(cfg, rule)
    kx = _factor_matrix(grid, spec, Factor.FIRST)
    ky = _factor_matrix(grid, spec, Factor.SECOND)
    blocks = np.asarray(stack, dtype=np.float64).reshape(-1, grid.size_x, grid.size_y)
    out = np.einsum("ia,kab,jb->kij", kx, blocks, ky, optimize=True)
    return out.reshape(-1, grid.size)


# --------------------------------------------------------------------
# Direct path
# --------------------------------------------------------------------
def strong_fractional_integral_direct(
    f: GridFunction,
    cfg: ExponentConfig,
    rule: SelfCellRule | None = None,
) -> OperatorOutput:
    """Literal double sum over all product-cell pairs; the oracle for the separable path."""
    _check_config(f, cfg)
    check_guard(f.grid)
    matrix = _product_matrix(f.grid, kernel_spec(cfg, rule))
    return OperatorOutput(result=f.with_values(compensated_apply(matrix, f.values)))


def joint_fractional_integral(
    f: GridFunction,
    cfg: ExponentConfig,
) -> OperatorOutput:
    """One-parameter fractional integral of order alpha + beta on R^(n+m)."""
    _check_config(f, cfg)
    check_guard(f.grid)
    grid = f.grid
    matrix = joint_kernel_matrix(grid, cfg.alpha + cfg.beta) * grid.cell_volume
    return OperatorOutput(result=f.with_values(compensated_apply(matrix, f.values)))


# --------------------------------------------------------------------
# Cone operators
# --------------------------------------------------------------------
def _masked(matrix: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return np.where(mask, matrix, 0.0)


def _excluded_parts(matrix, labels, columns):
    excluded = _masked(matrix, labels == NOT_IN_CONE)
    sums = compensated_apply(excluded, columns)
    mass = float(np.sum(np.abs(excluded) @ np.abs(columns)))
    return sums, mass


def cone_operator_batch(
    grid: ProductGrid,
    cfg: ExponentConfig,
    ell: int,
    stack: np.ndarray,
    rule: SelfCellRule | None = None,
) -> np.ndarray:
    """Cone-restricted sums for a stack of inputs, shape (k, size) -> (k, size)."""
    check_guard(grid)
    matrix = _product_matrix(grid, kernel_spec(cfg, rule))
    labels = _labels(grid)
    columns = np.asarray(stack, dtype=np.float64).reshape(-1, grid.size).T
    return compensated_apply(_masked(matrix, labels == ell), columns).T


def cone_operator(
    f: GridFunction,
    cfg: ExponentConfig,
    ell: int,
    rule: SelfCellRule | None = None,
) -> OperatorOutput:
    """
    The partial operator on the cone of index ell.

    Pairs with |x-u| = 0 or |y-v| = 0 belong to no cone; their sum is returned
    as `excluded` and their total absolute contribution as `excluded_mass`.
    """
    _check_config(f, cfg)
    check_guard(f.grid)
    matrix = _product_matrix(f.grid, kernel_spec(cfg, rule))
    labels = _labels(f.grid)
    values = compensated_apply(_masked(matrix, labels == ell), f.values)
    excluded, mass = _excluded_parts(matrix, labels, f.values)
    logger.debug("Cone %d evaluated, excluded mass %.3e", ell, mass)
    return OperatorOutput(
        result=f.with_values(values),
        excluded_mass=mass,
        ell_range_used=(int(ell), int(ell)),
        excluded=f.with_values(excluded),
    )


def cone_sum(
    f: GridFunction,
    cfg: ExponentConfig,
    ell_min: int,
    ell_max: int,
    rule: SelfCellRule | None = None,
) -> OperatorOutput:
    """
    Sum of the partial operators for ell_min <= ell <= ell_max.

    The excluded pairs and the pairs whose cone index falls outside the range
    are reported separately (`excluded`, `residual`), so that
    result + excluded + residual reproduces the direct sum.
    """
    if ell_min > ell_max:
        raise ValidationError(f"empty cone range [{ell_min}, {ell_max}]")
    _check_config(f, cfg)
    check_guard(f.grid)
    matrix = _product_matrix(f.grid, kernel_spec(cfg, rule))
    labels = _labels(f.grid)

    in_cone = labels != NOT_IN_CONE
    in_range = in_cone & (labels >= ell_min) & (labels <= ell_max)
    values = compensated_apply(_masked(matrix, in_range), f.values)
    residual = compensated_apply(_masked(matrix, in_cone & ~in_range), f.values)
    excluded, mass = _excluded_parts(matrix, labels, f.values)

    lo, hi = achievable_cone_range(f.grid)
    used = (max(lo, ell_min), min(hi, ell_max))
    return OperatorOutput(
        result=f.with_values(values),
        excluded_mass=mass,
        ell_range_used=used if used[0] <= used[1] else None,
        excluded=f.with_values(excluded),
        residual=f.with_values(residual),
    )
