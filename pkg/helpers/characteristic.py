"""
Bump characteristics of a weight pair over dyadic rectangles.

Per rectangle the (non-averaged) value is

    |Q|^(alpha/n - 1/t) |P|^(beta/m - 1/t)
        * (int_{QxP} w^(pt))^(1/(pt)) * (int_{QxP} s^(-pt/(p-1)))^((p-1)/(pt))

with integrals taken as cell sums. Suprema range over a finite dyadic family
and are computed one size class at a time from block sums.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from helpers.exceptions import EmptyFamilyError, TrivialWeightError, ValidationError
from helpers.grid import (
    DyadicRectangle,
    ExponentConfig,
    Factor,
    GridFunction,
    ProductGrid,
    RectangleFilter,
    class_eccentricity,
    dilate_rectangle,
    size_classes,
)

logger = logging.getLogger(__name__)

TABLE_COLUMNS = ["q_corner", "q_side", "p_corner", "p_side", "ell", "value"]


@dataclass(frozen=True, eq=False)
class WeightPair:
    """
    omega >= 0 and sigma >= 0 on a common grid.

    Zero samples of sigma are allowed here. Every quantity that integrates
    sigma^-s over a rectangle raises TrivialWeightError when the rectangle
    holds a zero, so a pair with a zero cell has no finite supremum over
    a family that covers the grid.
    """

    omega: GridFunction
    sigma: GridFunction

    def __post_init__(self):
        if self.omega.grid != self.sigma.grid:
            raise ValidationError("omega and sigma live on different grids")
        if np.any(self.omega.values < 0):
            raise ValidationError("omega must be non-negative")
        if np.any(self.sigma.values < 0):
            raise ValidationError("sigma must be non-negative")

    @property
    def grid(self) -> ProductGrid:
        return self.omega.grid

    def scaled(self, omega_factor: float = 1.0, sigma_factor: float = 1.0) -> "WeightPair":
        return WeightPair(
            self.omega.with_values(omega_factor * self.omega.values),
            self.sigma.with_values(sigma_factor * self.sigma.values),
        )


@dataclass(eq=False)
class CharacteristicReport:
    """Supremum over a rectangle family with its arg-max."""

    value: float
    argmax: DyadicRectangle
    family_size: int
    family: str
    t: float
    per_rectangle_values: pd.DataFrame | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "value": float(self.value),
            "argmax": self.argmax.to_dict(),
            "family_size": int(self.family_size),
            "family": self.family,
            "t": float(self.t),
        }


# --------------------------------------------------------------------
# Integrands
# --------------------------------------------------------------------
def _check_exponents(p: float, t: float) -> None:
    if not p > 1.0:
        raise ValidationError(f"p must exceed 1, got {p!r}")
    if not t > 1.0:
        raise ValidationError(f"t must exceed 1, got {t!r}")


def _integrands(w: WeightPair, omega_power: float, sigma_power: float):
    """omega^omega_power and sigma^-sigma_power as blocks, plus the zero indicator of sigma."""
    omega = w.omega.as_blocks() ** omega_power
    sigma = w.sigma.as_blocks()
    zeros = sigma == 0.0
    with np.errstate(divide="ignore"):
        inverse = np.where(zeros, 0.0, np.where(zeros, 1.0, sigma) ** (-sigma_power))
    return omega, inverse, zeros


def _rectangle_integrals(w: WeightPair, r: DyadicRectangle, omega_exponent: float, sigma_exponent: float):
    if not r.fits(w.grid):
        raise ValidationError(f"rectangle {r.to_dict()} does not lie inside the grid")
    block = r.slices
    omega = w.omega.as_blocks()[block]
    sigma = w.sigma.as_blocks()[block]
    if (sigma == 0.0).any():
        raise TrivialWeightError(f"sigma vanishes inside rectangle {r.to_dict()}")
    volume = w.grid.cell_volume
    return (
        float(np.sum(omega**omega_exponent)) * volume,
        float(np.sum(sigma ** (-sigma_exponent))) * volume,
    )


def b_quantity(w: WeightPair, r: DyadicRectangle, p: float, t: float) -> float:
    """The characteristic without its geometric prefactor."""
    _check_exponents(p, t)
    s_omega, s_sigma = _rectangle_integrals(w, r, p * t, p * t / (p - 1.0))
    return s_omega ** (1.0 / (p * t)) * s_sigma ** ((p - 1.0) / (p * t))


def geometric_prefactor(r: DyadicRectangle, cfg: ExponentConfig, t: float) -> float:
    """|Q|^(alpha/n - 1/t) |P|^(beta/m - 1/t)."""
    return r.q_volume ** (cfg.alpha / cfg.n - 1.0 / t) * r.p_volume ** (cfg.beta / cfg.m - 1.0 / t)


def bump_characteristic_rectangle(
    w: WeightPair,
    r: DyadicRectangle,
    cfg: ExponentConfig,
    t: float,
    use_q_form: bool = False,
) -> float:
    """
    The bump characteristic of one rectangle.

    use_q_form selects the averaged p <= q form with prefactor
    |Q|^(alpha/n - 1/p + 1/q) |P|^(beta/m - 1/p + 1/q) and omega raised to q*t.
    """
    cfg.check_bump(t)
    if not use_q_form:
        return geometric_prefactor(r, cfg, t) * b_quantity(w, r, cfg.p, t)

    p, q = cfg.p, cfg.q
    s_omega, s_sigma = _rectangle_integrals(w, r, q * t, p * t / (p - 1.0))
    measure = r.q_volume * r.p_volume
    shift = 1.0 / q - 1.0 / p
    prefactor = r.q_volume ** (cfg.alpha / cfg.n + shift) * r.p_volume ** (cfg.beta / cfg.m + shift)
    return prefactor * (s_omega / measure) ** (1.0 / (q * t)) * (s_sigma / measure) ** ((p - 1.0) / (p * t))


# --------------------------------------------------------------------
# Suprema
# --------------------------------------------------------------------
def _block_sums(array: np.ndarray, grid: ProductGrid, q_side: int, p_side: int) -> np.ndarray:
    """Sums over every aligned block of the size class; axes are the block corners."""
    shape = []
    for _ in range(grid.n):
        shape += [grid.cells_x // q_side, q_side]
    for _ in range(grid.m):
        shape += [grid.cells_y // p_side, p_side]
    return array.reshape(shape).sum(axis=tuple(range(1, len(shape), 2)))


def _class_values(
    w: WeightPair,
    cfg: ExponentConfig,
    t: float,
    q_side: int,
    p_side: int,
    use_q_form: bool,
    integrands,
) -> np.ndarray:
    grid = w.grid
    omega, inverse, zeros = integrands
    if _block_sums(zeros, grid, q_side, p_side).any():
        raise TrivialWeightError(
            f"sigma vanishes inside some rectangle of size class ({q_side}, {p_side})"
        )
    volume = grid.cell_volume
    s_omega = _block_sums(omega, grid, q_side, p_side) * volume
    s_sigma = _block_sums(inverse, grid, q_side, p_side) * volume
    q_volume = (q_side * grid.h_x) ** grid.n
    p_volume = (p_side * grid.h_y) ** grid.m
    p = cfg.p

    if not use_q_form:
        prefactor = q_volume ** (cfg.alpha / cfg.n - 1.0 / t) * p_volume ** (cfg.beta / cfg.m - 1.0 / t)
        return prefactor * s_omega ** (1.0 / (p * t)) * s_sigma ** ((p - 1.0) / (p * t))

    q = cfg.q
    measure = q_volume * p_volume
    shift = 1.0 / q - 1.0 / p
    prefactor = q_volume ** (cfg.alpha / cfg.n + shift) * p_volume ** (cfg.beta / cfg.m + shift)
    return prefactor * (s_omega / measure) ** (1.0 / (q * t)) * (s_sigma / measure) ** ((p - 1.0) / (p * t))


def _rectangle_from_index(grid: ProductGrid, q_side: int, p_side: int, shape, flat_index: int) -> DyadicRectangle:
    corner = np.unravel_index(flat_index, shape)
    q_corner = tuple(int(c) * q_side for c in corner[: grid.n])
    p_corner = tuple(int(c) * p_side for c in corner[grid.n :])
    return DyadicRectangle(q_corner, q_side, p_corner, p_side, grid.h_x, grid.h_y)


def _class_table(grid: ProductGrid, q_side: int, p_side: int, values: np.ndarray) -> pd.DataFrame:
    corners = np.indices(values.shape).reshape(values.ndim, -1).T
    return pd.DataFrame(
        {
            "q_corner": [" ".join(str(int(c) * q_side) for c in row[: grid.n]) for row in corners],
            "q_side": q_side,
            "p_corner": [" ".join(str(int(c) * p_side) for c in row[grid.n :]) for row in corners],
            "p_side": p_side,
            "ell": class_eccentricity(grid, q_side, p_side),
            "value": values.reshape(-1),
        },
        columns=TABLE_COLUMNS,
    )


def bump_characteristic_sup(
    w: WeightPair,
    cfg: ExponentConfig,
    t: float,
    family: RectangleFilter | None = None,
    use_q_form: bool = False,
    keep_table: bool = False,
) -> CharacteristicReport:
    """
    Maximum of the rectangle characteristic over a dyadic family.

    Ties keep the rectangle that comes first in enumeration order.
    """
    cfg.check_bump(t)
    family = family or RectangleFilter.all()
    grid = w.grid
    if not cfg.matches(grid):
        raise ValidationError("exponent dimensions do not match the weight grid")

    classes = size_classes(grid, family)
    if not classes:
        raise EmptyFamilyError(f"no dyadic rectangle matches {family.label()}")

    omega_exponent = (cfg.q if use_q_form else cfg.p) * t
    integrands = _integrands(w, omega_exponent, cfg.p * t / (cfg.p - 1.0))

    best_value = -np.inf
    best_rect = None
    size = 0
    tables = []
    for q_side, p_side in classes:
        values = _class_values(w, cfg, t, q_side, p_side, use_q_form, integrands)
        size += values.size
        index = int(np.argmax(values))
        if values.reshape(-1)[index] > best_value:
            best_value = float(values.reshape(-1)[index])
            best_rect = _rectangle_from_index(grid, q_side, p_side, values.shape, index)
        if keep_table:
            tables.append(_class_table(grid, q_side, p_side, values))

    logger.debug("Supremum over %s (%d rectangles): %.6g", family.label(), size, best_value)
    return CharacteristicReport(
        value=best_value,
        argmax=best_rect,
        family_size=size,
        family=family.label(),
        t=float(t),
        per_rectangle_values=pd.concat(tables, ignore_index=True) if keep_table else None,
    )


# --------------------------------------------------------------------
# Dilations
# --------------------------------------------------------------------
def b_ratio_probe(
    w: WeightPair,
    r: DyadicRectangle,
    p: float,
    t: float,
    ell: int,
    alpha: float,
    slack: float = 1.0,
) -> dict:
    """
    B[Q^ell x P] / B[Q x P] against 2^(ell (alpha - n/t)).

    Q^ell is the concentric first-factor cube shrunk by 2^-ell.
    """
    denominator = b_quantity(w, r, p, t)
    if denominator == 0.0:
        raise TrivialWeightError(f"B vanishes on rectangle {r.to_dict()}")
    ratio = b_quantity(w, dilate_rectangle(r, ell, Factor.FIRST), p, t) / denominator
    bound = 2.0 ** (ell * (alpha - r.n / t))
    return {"ratio": ratio, "bound": bound, "holds": bool(ratio <= slack * bound)}


def characteristic_dilation_sides(
    weights,
    grid: ProductGrid,
    r: DyadicRectangle,
    cfg: ExponentConfig,
    t: float,
    ell: int,
    factor: Factor = Factor.FIRST,
) -> tuple[float, float]:
    """
    Both sides of the characteristic dilation identity.

    FIRST, ell > 0: the rectangle value of omega(2^-ell x, y), sigma(2^-ell x, y)
    against 2^(alpha ell) times the value on the dilated rectangle 2^-ell Q x P.
    SECOND, ell <= 0: the mirrored identity with omega(x, 2^ell y) and factor 2^(-beta ell).

    `weights` must offer sample(grid, scale_x, scale_y) -> WeightPair.
    """
    if factor == Factor.FIRST:
        if ell <= 0:
            raise ValidationError("first-factor dilation needs ell > 0")
        k, scale_x, scale_y = ell, 2.0 ** (-ell), 1.0
        gain = 2.0 ** (cfg.alpha * ell)
    else:
        if ell > 0:
            raise ValidationError("second-factor dilation needs ell <= 0")
        k, scale_x, scale_y = -ell, 1.0, 2.0**ell
        gain = 2.0 ** (-cfg.beta * ell)

    lhs = bump_characteristic_rectangle(weights.sample(grid, scale_x, scale_y), r, cfg, t)

    dilated_grid = grid.dilated(k, factor)
    dilated_rect = DyadicRectangle(r.q_corner, r.q_side, r.p_corner, r.p_side, dilated_grid.h_x, dilated_grid.h_y)
    rhs = gain * bump_characteristic_rectangle(weights.sample(dilated_grid), dilated_rect, cfg, t)
    return lhs, rhs
