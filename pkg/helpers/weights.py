"""
Weight families for the characteristic and the two-weight ratio runs.

Every family offers sample(grid, scale_x, scale_y) -> WeightPair. Analytic
families evaluate at the scaled cell centers (scale_x * x, scale_y * y), which
is what the dilation identities resample on; cell-indexed families ignore the
scales.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from helpers import config
from helpers.characteristic import WeightPair
from helpers.exceptions import ValidationError
from helpers.grid import ExponentConfig, GridFunction, ProductGrid
from helpers.run_functions import read_grid_function

logger = logging.getLogger(__name__)

WEIGHT_KINDS = ("unit", "power", "random", "file")


@dataclass(frozen=True)
class UnitWeights:
    """omega = sigma = 1."""

    def sample(self, grid: ProductGrid, scale_x: float = 1.0, scale_y: float = 1.0) -> WeightPair:
        one = GridFunction.constant(grid, 1.0)
        return WeightPair(one, one)

    def validate(self, cfg: ExponentConfig, t: float) -> None:
        cfg.check_bump(t)

    def to_dict(self) -> dict:
        return {"kind": "unit"}


@dataclass(frozen=True)
class PowerWeights:
    """
    omega(x, y) = (|x| + delta_x)^-a (|y| + delta_y)^-b
    sigma(x, y) = (|x| + delta_x)^c  (|y| + delta_y)^d
    """

    a: float
    b: float
    c: float
    d: float
    delta_x: float
    delta_y: float

    def __post_init__(self):
        if not (self.delta_x > 0.0 and self.delta_y > 0.0):
            raise ValidationError(
                f"power weight offsets must be positive, got ({self.delta_x}, {self.delta_y})"
            )

    @classmethod
    def for_grid(
        cls,
        grid: ProductGrid,
        a: float = config.DEFAULT_POWER_WEIGHTS["a"],
        b: float = config.DEFAULT_POWER_WEIGHTS["b"],
        c: float = config.DEFAULT_POWER_WEIGHTS["c"],
        d: float = config.DEFAULT_POWER_WEIGHTS["d"],
        delta: float | None = None,
    ) -> "PowerWeights":
        """Offsets default to one cell step of each factor."""
        delta_x = grid.h_x if delta is None else delta
        delta_y = grid.h_y if delta is None else delta
        return cls(float(a), float(b), float(c), float(d), float(delta_x), float(delta_y))

    def _radial(self, x, y):
        rx = np.sqrt(np.sum(x * x, axis=-1)) + self.delta_x
        ry = np.sqrt(np.sum(y * y, axis=-1)) + self.delta_y
        return rx, ry

    def omega_at(self, x, y):
        rx, ry = self._radial(x, y)
        return rx ** (-self.a) * ry ** (-self.b)

    def sigma_at(self, x, y):
        rx, ry = self._radial(x, y)
        return rx**self.c * ry**self.d

    def sample(self, grid: ProductGrid, scale_x: float = 1.0, scale_y: float = 1.0) -> WeightPair:
        omega = GridFunction.sample(grid, lambda x, y: self.omega_at(scale_x * x, scale_y * y))
        sigma = GridFunction.sample(grid, lambda x, y: self.sigma_at(scale_x * x, scale_y * y))
        return WeightPair(omega, sigma)

    def validate(self, cfg: ExponentConfig, t: float) -> None:
        """
        Reject exponents whose bump integrals diverge at the origin in the
        continuum: a p t < n, c p t/(p-1) < n, b p t < m, d p t/(p-1) < m.
        """
        cfg.check_bump(t)
        omega_power = cfg.p * t
        sigma_power = cfg.p * t / (cfg.p - 1.0)
        checks = (
            ("a", self.a * omega_power, cfg.n),
            ("c", self.c * sigma_power, cfg.n),
            ("b", self.b * omega_power, cfg.m),
            ("d", self.d * sigma_power, cfg.m),
        )
        for name, power, dim in checks:
            if power >= dim:
                raise ValidationError(
                    f"power weight exponent {name} makes the bump integral diverge "
                    f"({power:.6g} >= {dim}) at p={cfg.p}, t={t}"
                )

    def to_dict(self) -> dict:
        return {
            "kind": "power",
            "a": self.a,
            "b": self.b,
            "c": self.c,
            "d": self.d,
            "delta_x": self.delta_x,
            "delta_y": self.delta_y,
        }


@dataclass(frozen=True)
class RandomWeights:
    """Cell-wise i.i.d. weights, uniform in [low, high)."""

    seed: int
    low: float = 0.5
    high: float = 2.0

    def __post_init__(self):
        if not 0.0 < self.low < self.high:
            raise ValidationError(f"random weights need 0 < low < high, got ({self.low}, {self.high})")

    def sample(self, grid: ProductGrid, scale_x: float = 1.0, scale_y: float = 1.0) -> WeightPair:
        rng = np.random.default_rng(self.seed)
        omega = rng.uniform(self.low, self.high, grid.size)
        sigma = rng.uniform(self.low, self.high, grid.size)
        return WeightPair(GridFunction(grid, omega), GridFunction(grid, sigma))

    def validate(self, cfg: ExponentConfig, t: float) -> None:
        cfg.check_bump(t)

    def to_dict(self) -> dict:
        return {"kind": "random", "seed": int(self.seed), "low": self.low, "high": self.high}


@dataclass(frozen=True)
class FileWeights:
    """omega and sigma read from GridFunction binaries (with JSON sidecars)."""

    omega_path: Path
    sigma_path: Path

    def sample(self, grid: ProductGrid, scale_x: float = 1.0, scale_y: float = 1.0) -> WeightPair:
        omega = read_grid_function(self.omega_path)
        sigma = read_grid_function(self.sigma_path)
        if omega.grid != grid or sigma.grid != grid:
            raise ValidationError(
                f"weight files {self.omega_path.name}, {self.sigma_path.name} do not match the run grid"
            )
        return WeightPair(omega, sigma)

    def validate(self, cfg: ExponentConfig, t: float) -> None:
        cfg.check_bump(t)

    def to_dict(self) -> dict:
        return {"kind": "file", "omega_path": str(self.omega_path), "sigma_path": str(self.sigma_path)}


def build_weights(kind: str, grid: ProductGrid, params: dict | None = None, seed: int = config.DEFAULT_SEED):
    """Weight family from its configuration block."""
    params = dict(params or {})
    logger.debug("Building %s weights with %s", kind, params)

    if kind == "unit":
        return UnitWeights()

    if kind == "power":
        defaults = config.DEFAULT_POWER_WEIGHTS
        return PowerWeights.for_grid(
            grid,
            a=params.get("a", defaults["a"]),
            b=params.get("b", defaults["b"]),
            c=params.get("c", defaults["c"]),
            d=params.get("d", defaults["d"]),
            delta=params.get("delta"),
        )

    if kind == "random":
        return RandomWeights(int(params.get("seed", seed)))

    if kind == "file":
        try:
            return FileWeights(Path(params["omega_path"]), Path(params["sigma_path"]))
        except KeyError as e:
            raise ValidationError(f"file weights need {e.args[0]!r}") from e

    raise ValidationError(f"unknown weight kind {kind!r}, expected one of {', '.join(WEIGHT_KINDS)}")
