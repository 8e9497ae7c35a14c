"""
Product-space discretization.

A ProductGrid is the centered box [-extent_x, extent_x]^n x [-extent_y, extent_y]^m
split into cells_x^n x cells_y^m congruent cells. Samples live at cell centers
(midpoint rule). Dyadic rectangles are products of lattice cubes whose sides are
powers of two in cell units, so every rectangle covers whole cells.
"""

import itertools
import logging
import math
import operator
from dataclasses import dataclass
from enum import StrEnum
from functools import cached_property

import numpy as np

from helpers.exceptions import ValidationError

logger = logging.getLogger(__name__)

MAX_FACTOR_DIMENSION = 2


class Factor(StrEnum):
    """The two factors of R^n x R^m."""

    FIRST = "first"
    SECOND = "second"


class FamilyKind(StrEnum):
    """Rectangle families a supremum can range over."""

    ALL = "ALL"
    ECCENTRICITY = "ECCENTRICITY"
    DIAGONAL = "DIAGONAL"


def is_power_of_two(value: int) -> bool:
    """True for 1, 2, 4, 8, ..."""
    return _is_count(value) and value >= 1 and (value & (value - 1)) == 0


def _is_count(value) -> bool:
    return isinstance(value, int | np.integer) and not isinstance(value, bool | np.bool_)


def _as_count(name: str, value) -> int:
    """Integral value as int; bools and fractional numbers are rejected rather than truncated."""
    if isinstance(value, bool | np.bool_):
        raise ValidationError(f"{name} must be an integer, got {value!r}")
    try:
        return operator.index(value)
    except TypeError:
        pass
    if isinstance(value, float | np.floating) and float(value).is_integer():
        return int(value)
    raise ValidationError(f"{name} must be an integer, got {value!r}")


# --------------------------------------------------------------------
# Grid
# --------------------------------------------------------------------
@dataclass(frozen=True)
class ProductGrid:
    """Uniform discretization of a centered box in R^n x R^m."""

    n: int
    m: int
    extent_x: float
    extent_y: float
    cells_x: int
    cells_y: int

    def __post_init__(self):
        for name in ("n", "m"):
            dim = getattr(self, name)
            if not _is_count(dim) or not 1 <= dim <= MAX_FACTOR_DIMENSION:
                raise ValidationError(
                    f"{name} must be an integer in [1, {MAX_FACTOR_DIMENSION}], got {dim!r}"
                )
        for name in ("extent_x", "extent_y"):
            extent = getattr(self, name)
            if not math.isfinite(extent) or extent <= 0:
                raise ValidationError(f"{name} must be positive and finite, got {extent!r}")
        for name in ("cells_x", "cells_y"):
            cells = getattr(self, name)
            if not is_power_of_two(cells):
                raise ValidationError(f"{name} must be a power of two, got {cells!r}")

    # ---- per-factor geometry ----
    @property
    def h_x(self) -> float:
        """Cell step of the first factor."""
        return 2.0 * self.extent_x / self.cells_x

    @property
    def h_y(self) -> float:
        """Cell step of the second factor."""
        return 2.0 * self.extent_y / self.cells_y

    @property
    def cell_volume_x(self) -> float:
        return self.h_x**self.n

    @property
    def cell_volume_y(self) -> float:
        return self.h_y**self.m

    @property
    def cell_volume(self) -> float:
        return self.cell_volume_x * self.cell_volume_y

    @property
    def size_x(self) -> int:
        """Number of first-factor cells."""
        return self.cells_x**self.n

    @property
    def size_y(self) -> int:
        return self.cells_y**self.m

    @property
    def size(self) -> int:
        """Number of product cells."""
        return self.size_x * self.size_y

    @property
    def shape(self) -> tuple[int, ...]:
        """Block shape of a GridFunction: one axis per coordinate."""
        return (self.cells_x,) * self.n + (self.cells_y,) * self.m

    @property
    def box_volume_x(self) -> float:
        return (2.0 * self.extent_x) ** self.n

    @property
    def box_volume_y(self) -> float:
        return (2.0 * self.extent_y) ** self.m

    @property
    def box_volume(self) -> float:
        return self.box_volume_x * self.box_volume_y

    def dim(self, factor: Factor) -> int:
        return self.n if factor == Factor.FIRST else self.m

    def step(self, factor: Factor) -> float:
        return self.h_x if factor == Factor.FIRST else self.h_y

    def cell_volume_of(self, factor: Factor) -> float:
        return self.cell_volume_x if factor == Factor.FIRST else self.cell_volume_y

    @cached_property
    def axis_centers_x(self) -> np.ndarray:
        return _midpoints(self.extent_x, self.cells_x)

    @cached_property
    def axis_centers_y(self) -> np.ndarray:
        return _midpoints(self.extent_y, self.cells_y)

    @cached_property
    def indices_x(self) -> np.ndarray:
        """Integer cell coordinates of the first-factor cells, shape (size_x, n), row-major."""
        return _lattice_indices(self.cells_x, self.n)

    @cached_property
    def indices_y(self) -> np.ndarray:
        return _lattice_indices(self.cells_y, self.m)

    @cached_property
    def centers_x(self) -> np.ndarray:
        """Cell centers of the first factor, shape (size_x, n)."""
        return self.axis_centers_x[self.indices_x]

    @cached_property
    def centers_y(self) -> np.ndarray:
        return self.axis_centers_y[self.indices_y]

    def centers(self, factor: Factor) -> np.ndarray:
        return self.centers_x if factor == Factor.FIRST else self.centers_y

    def indices(self, factor: Factor) -> np.ndarray:
        return self.indices_x if factor == Factor.FIRST else self.indices_y

    @property
    def aspect_exponent(self) -> float:
        """log2(h_x / h_y); integral when eccentricities are exact integers."""
        return math.log2(self.h_x / self.h_y)

    def dilated(self, k: int, factor: Factor) -> "ProductGrid":
        """The same cell lattice with one factor's box scaled by 2^-k."""
        scale = 2.0 ** (-k)
        if factor == Factor.FIRST:
            return ProductGrid(self.n, self.m, self.extent_x * scale, self.extent_y, self.cells_x, self.cells_y)
        return ProductGrid(self.n, self.m, self.extent_x, self.extent_y * scale, self.cells_x, self.cells_y)

    def to_dict(self) -> dict:
        """JSON description of the grid."""
        return {
            "n": int(self.n),
            "m": int(self.m),
            "extent_x": float(self.extent_x),
            "extent_y": float(self.extent_y),
            "cells_x": int(self.cells_x),
            "cells_y": int(self.cells_y),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProductGrid":
        return make_grid(
            data["n"],
            data["m"],
            data["extent_x"],
            data["extent_y"],
            data["cells_x"],
            data["cells_y"],
        )


def _midpoints(extent: float, cells: int) -> np.ndarray:
    h = 2.0 * extent / cells
    return -extent + h * (np.arange(cells) + 0.5)


def _lattice_indices(cells: int, dim: int) -> np.ndarray:
    axes = np.meshgrid(*([np.arange(cells)] * dim), indexing="ij")
    return np.stack([a.reshape(-1) for a in axes], axis=1)


def make_grid(
    n: int,
    m: int,
    extent_x: float,
    extent_y: float,
    cells_x: int,
    cells_y: int,
) -> ProductGrid:
    """Build a ProductGrid, validating dimensions, extents and cell counts."""
    grid = ProductGrid(
        _as_count("n", n),
        _as_count("m", m),
        float(extent_x),
        float(extent_y),
        _as_count("cells_x", cells_x),
        _as_count("cells_y", cells_y),
    )
    logger.debug(
        "Grid n=%d m=%d cells=%dx%d (%d product cells, box volume %g)",
        grid.n,
        grid.m,
        grid.cells_x,
        grid.cells_y,
        grid.size,
        grid.box_volume,
    )
    return grid


# --------------------------------------------------------------------
# Grid functions
# --------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real samples on a ProductGrid, row-major over first-factor then second-factor cells."""

    grid: ProductGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if values.size != self.grid.size:
            raise ValidationError(
                f"GridFunction needs {self.grid.size} values, got {values.size}"
            )
        if not np.all(np.isfinite(values)):
            raise ValidationError("GridFunction values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def as_matrix(self) -> np.ndarray:
        """Values as (size_x, size_y)."""
        return self.values.reshape(self.grid.size_x, self.grid.size_y)

    def as_blocks(self) -> np.ndarray:
        """Values with one axis per coordinate."""
        return self.values.reshape(self.grid.shape)

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.grid, values)

    def on(self, grid: ProductGrid) -> "GridFunction":
        """The same samples attached to another grid of identical cell layout."""
        if grid.shape != self.grid.shape:
            raise ValidationError(f"cell layout {grid.shape} differs from {self.grid.shape}")
        return GridFunction(grid, self.values)

    @classmethod
    def zeros(cls, grid: ProductGrid) -> "GridFunction":
        return cls(grid, np.zeros(grid.size))

    @classmethod
    def constant(cls, grid: ProductGrid, value: float) -> "GridFunction":
        return cls(grid, np.full(grid.size, float(value)))

    @classmethod
    def sample(cls, grid: ProductGrid, fn) -> "GridFunction":
        """
        Sample fn at the cell centers.

        fn receives x of shape (size_x, 1, n) and y of shape (1, size_y, m)
        and returns an array broadcastable to (size_x, size_y).
        """
        x = grid.centers_x[:, None, :]
        y = grid.centers_y[None, :, :]
        values = np.broadcast_to(fn(x, y), (grid.size_x, grid.size_y))
        return cls(grid, values)

    @classmethod
    def product(cls, grid: ProductGrid, fx, fy) -> "GridFunction":
        """Tensor product f1(x) f2(y) from per-factor sample vectors."""
        fx = np.asarray(fx, dtype=np.float64).reshape(-1)
        fy = np.asarray(fy, dtype=np.float64).reshape(-1)
        return cls(grid, np.outer(fx, fy))


# --------------------------------------------------------------------
# Dyadic rectangles
# --------------------------------------------------------------------
@dataclass(frozen=True)
class DyadicRectangle:
    """Q x P with Q, P lattice cubes whose sides are powers of two in cell units."""

    q_corner: tuple[int, ...]
    q_side: int
    p_corner: tuple[int, ...]
    p_side: int
    h_x: float
    h_y: float

    def __post_init__(self):
        if not is_power_of_two(self.q_side) or not is_power_of_two(self.p_side):
            raise ValidationError(
                f"rectangle sides must be powers of two, got {self.q_side}, {self.p_side}"
            )
        if min(self.q_corner + self.p_corner) < 0:
            raise ValidationError("rectangle corners must be non-negative")

    @property
    def n(self) -> int:
        return len(self.q_corner)

    @property
    def m(self) -> int:
        return len(self.p_corner)

    @property
    def q_length(self) -> float:
        """|Q|^{1/n}."""
        return self.q_side * self.h_x

    @property
    def p_length(self) -> float:
        return self.p_side * self.h_y

    @property
    def q_volume(self) -> float:
        return self.q_length**self.n

    @property
    def p_volume(self) -> float:
        return self.p_length**self.m

    @property
    def eccentricity(self) -> float:
        """-log2(|Q|^{1/n} / |P|^{1/m})."""
        return -math.log2(self.q_length / self.p_length)

    @property
    def slices(self) -> tuple[slice, ...]:
        """Index slices into GridFunction.as_blocks()."""
        q = tuple(slice(c, c + self.q_side) for c in self.q_corner)
        p = tuple(slice(c, c + self.p_side) for c in self.p_corner)
        return q + p

    def fits(self, grid: ProductGrid) -> bool:
        return (
            self.n == grid.n
            and self.m == grid.m
            and all(c + self.q_side <= grid.cells_x for c in self.q_corner)
            and all(c + self.p_side <= grid.cells_y for c in self.p_corner)
        )

    def to_dict(self) -> dict:
        return {
            "q_corner": list(self.q_corner),
            "q_side": self.q_side,
            "p_corner": list(self.p_corner),
            "p_side": self.p_side,
            "eccentricity": self.eccentricity,
        }


def make_rectangle(
    grid: ProductGrid,
    q_corner,
    q_side: int,
    p_corner,
    p_side: int,
) -> DyadicRectangle:
    """Build a rectangle and check that it lies inside the grid box."""
    rect = DyadicRectangle(
        tuple(int(c) for c in np.atleast_1d(q_corner)),
        int(q_side),
        tuple(int(c) for c in np.atleast_1d(p_corner)),
        int(p_side),
        grid.h_x,
        grid.h_y,
    )
    if not rect.fits(grid):
        raise ValidationError(f"rectangle {rect.to_dict()} does not lie inside the grid")
    return rect


@dataclass(frozen=True)
class RectangleFilter:
    """Which dyadic rectangles a family contains."""

    kind: FamilyKind = FamilyKind.ALL
    ell: int | None = None

    def __post_init__(self):
        if self.kind == FamilyKind.ECCENTRICITY and self.ell is None:
            raise ValidationError("ECCENTRICITY filter needs an ell")

    @classmethod
    def all(cls) -> "RectangleFilter":
        return cls(FamilyKind.ALL)

    @classmethod
    def eccentricity(cls, ell: int) -> "RectangleFilter":
        return cls(FamilyKind.ECCENTRICITY, int(ell))

    @classmethod
    def diagonal(cls) -> "RectangleFilter":
        return cls(FamilyKind.DIAGONAL)

    @property
    def target(self) -> int | None:
        """Required eccentricity, None for ALL."""
        if self.kind == FamilyKind.DIAGONAL:
            return 0
        return self.ell if self.kind == FamilyKind.ECCENTRICITY else None

    def label(self) -> str:
        if self.kind == FamilyKind.ECCENTRICITY:
            return f"{self.kind.value}({self.ell})"
        return self.kind.value


def dyadic_sides(cells: int) -> list[int]:
    """1, 2, 4, ..., cells."""
    return [1 << k for k in range(cells.bit_length())]


def class_eccentricity(grid: ProductGrid, q_side: int, p_side: int) -> int | None:
    """Integral eccentricity of a (Q side, P side) size class, None if not integral."""
    ecc = -(math.log2(q_side / p_side) + grid.aspect_exponent)
    return int(ecc) if float(ecc).is_integer() else None


def size_classes(grid: ProductGrid, family: RectangleFilter) -> list[tuple[int, int]]:
    """(Q side, P side) pairs admitted by the filter, Q side ascending then P side ascending."""
    target = family.target
    classes = []
    for q_side in dyadic_sides(grid.cells_x):
        for p_side in dyadic_sides(grid.cells_y):
            if target is None or class_eccentricity(grid, q_side, p_side) == target:
                classes.append((q_side, p_side))
    return classes


def _cube_corners(cells: int, dim: int, side: int):
    return itertools.product(range(0, cells, side), repeat=dim)


def enumerate_dyadic_rectangles(
    grid: ProductGrid,
    family: RectangleFilter | None = None,
) -> list[DyadicRectangle]:
    """
    Every aligned dyadic rectangle admitted by the filter, each exactly once.

    Order: size classes (Q side, then P side, ascending), then Q corners
    row-major, then P corners row-major.
    """
    family = family or RectangleFilter.all()
    rectangles = []
    for q_side, p_side in size_classes(grid, family):
        for q_corner in _cube_corners(grid.cells_x, grid.n, q_side):
            for p_corner in _cube_corners(grid.cells_y, grid.m, p_side):
                rectangles.append(DyadicRectangle(q_corner, q_side, p_corner, p_side, grid.h_x, grid.h_y))
    logger.debug("Enumerated %d rectangles for %s", len(rectangles), family.label())
    return rectangles


def family_size(grid: ProductGrid, family: RectangleFilter) -> int:
    return sum(
        (grid.cells_x // q_side) ** grid.n * (grid.cells_y // p_side) ** grid.m
        for q_side, p_side in size_classes(grid, family)
    )


def achievable_eccentricities(grid: ProductGrid) -> list[int]:
    """Sorted integral eccentricities of the ALL family."""
    found = {
        class_eccentricity(grid, q_side, p_side)
        for q_side, p_side in size_classes(grid, RectangleFilter.all())
    }
    return sorted(ecc for ecc in found if ecc is not None)


def dilate_rectangle(rect: DyadicRectangle, ell: int, factor: Factor = Factor.FIRST) -> DyadicRectangle:
    """
    The concentric cube with side 2^-ell times the original in one factor.

    When exact concentricity is impossible the cube is shifted toward the lower
    corner. ell = 0 returns the rectangle unchanged.
    """
    if ell < 0:
        raise ValidationError(f"dilation exponent must be non-negative, got {ell}")
    if ell == 0:
        return rect
    side = rect.q_side if factor == Factor.FIRST else rect.p_side
    shrunk = side >> ell
    if shrunk < 1 or shrunk << ell != side:
        raise ValidationError(f"side of {side} cells cannot shrink by 2^{ell} and keep one cell")
    offset = (side - shrunk) // 2
    if factor == Factor.FIRST:
        corner = tuple(c + offset for c in rect.q_corner)
        return DyadicRectangle(corner, shrunk, rect.p_corner, rect.p_side, rect.h_x, rect.h_y)
    corner = tuple(c + offset for c in rect.p_corner)
    return DyadicRectangle(rect.q_corner, rect.q_side, corner, shrunk, rect.h_x, rect.h_y)


# --------------------------------------------------------------------
# Exponents
# --------------------------------------------------------------------
@dataclass(frozen=True)
class ExponentConfig:
    """The tuple (n, m, alpha, beta, p, q, theta)."""

    n: int
    m: int
    alpha: float
    beta: float
    p: float
    q: float
    theta: float

    def __post_init__(self):
        if not 0.0 < self.alpha < self.n:
            raise ValidationError(f"alpha must lie in (0, n={self.n}), got {self.alpha!r}")
        if not 0.0 < self.beta < self.m:
            raise ValidationError(f"beta must lie in (0, m={self.m}), got {self.beta!r}")
        if not (math.isfinite(self.p) and self.p > 1.0):
            raise ValidationError(f"p must lie in (1, inf), got {self.p!r}")
        if not (math.isfinite(self.q) and self.q >= self.p):
            raise ValidationError(f"q must lie in [p, inf), got {self.q!r}")
        if not (math.isfinite(self.theta) and self.theta > 1.0):
            raise ValidationError(f"theta must lie in (1, inf), got {self.theta!r}")

    @classmethod
    def for_grid(
        cls,
        grid: ProductGrid,
        alpha: float,
        beta: float,
        p: float,
        q: float | None = None,
        theta: float = 3.0,
    ) -> "ExponentConfig":
        return cls(grid.n, grid.m, float(alpha), float(beta), float(p), float(q if q is not None else p), float(theta))

    def order(self, factor: Factor) -> float:
        return self.alpha if factor == Factor.FIRST else self.beta

    def matches(self, grid: ProductGrid) -> bool:
        return self.n == grid.n and self.m == grid.m

    def check_bump(self, t: float) -> None:
        """1 < t <= theta."""
        if not (math.isfinite(t) and 1.0 < t <= self.theta):
            raise ValidationError(f"bump exponent t must lie in (1, theta={self.theta}], got {t!r}")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "alpha": self.alpha,
            "beta": self.beta,
            "p": self.p,
            "q": self.q,
            "theta": self.theta,
        }
