"""
Module to load and validate the run configuration.

Precedence: built-in defaults < JSON config file < command-line flags.
"""

import copy
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

from helpers import config
from helpers.exceptions import ValidationError
from helpers.grid import ExponentConfig, ProductGrid, RectangleFilter
from helpers.kernel import SelfCellRule
from helpers.run_functions import read_json
from helpers.verify import CorpusKind
from helpers.weights import build_weights

logger = logging.getLogger(__name__)

SECTION_KEYS = {
    "grid": {"n", "m", "extent_x", "extent_y", "cells_x", "cells_y"},
    "exponents": {"alpha", "beta", "p", "q", "theta", "t"},
    "weights": {"kind", "a", "b", "c", "d", "delta", "seed", "omega_path", "sigma_path"},
    "corpus": {"kind", "count"},
    "filter": {"kind", "ell"},
    "input": {"kind", "path", "seed", "q_corner", "q_side", "p_corner", "p_side"},
}

SCALAR_KEYS = {
    "operator",
    "ell",
    "ell_min",
    "ell_max",
    "self_cell_rule",
    "seed",
    "threads",
    "oracle",
    "use_q_form",
    "keep_table",
    "profile",
    "self_test",
    "injected_eps",
    "checks",
    "calibration_path",
    "xlsx",
}

OPERATORS = ("strong", "joint", "cone", "cone_sum")
PROFILES = ("characteristic", "norm", "both")
INPUT_KINDS = ("zero", "random", "indicator", "file")


def default_document() -> dict:
    """The built-in configuration."""
    exponents = dict(config.DEFAULT_EXPONENTS)
    exponents["q"] = None
    return {
        "grid": dict(config.DEFAULT_GRID),
        "exponents": exponents,
        "weights": {"kind": "power", **config.DEFAULT_POWER_WEIGHTS},
        "corpus": {"kind": CorpusKind.RANDOM.value, "count": 150},
        "filter": {"kind": "ALL", "ell": None},
        "input": {"kind": "random"},
        "operator": "strong",
        "ell": 0,
        "ell_min": -3,
        "ell_max": 3,
        "self_cell_rule": None,
        "seed": config.DEFAULT_SEED,
        "threads": config.MAX_CONCURRENCY,
        "oracle": False,
        "use_q_form": False,
        "keep_table": False,
        "profile": "characteristic",
        "self_test": False,
        "injected_eps": 0.5,
        "checks": None,
        "calibration_path": str(config.CALIBRATION_PATH),
        "xlsx": False,
    }


def merge_document(base: dict, update: dict, source: str) -> dict:
    """Overlay update onto base, rejecting keys the configuration does not know."""
    merged = copy.deepcopy(base)
    for key, value in update.items():
        if key in SECTION_KEYS:
            if not isinstance(value, dict):
                raise ValidationError(f"{source}: section {key!r} must be an object")
            unknown = sorted(set(value) - SECTION_KEYS[key])
            if unknown:
                raise ValidationError(f"{source}: unknown keys in {key!r}: {', '.join(unknown)}")
            merged[key].update(value)
        elif key in SCALAR_KEYS:
            merged[key] = value
        else:
            raise ValidationError(f"{source}: unknown configuration key {key!r}")
    return merged


@dataclass(frozen=True)
class RunConfig:
    """A validated configuration document."""

    document: dict = field(repr=False)

    def __post_init__(self):
        # fail before any computation
        _ = self.grid
        cfg = self.exponents
        cfg.check_bump(self.t)
        if not cfg.matches(self.grid):
            raise ValidationError("exponent dimensions do not match the grid")
        if self.operator not in OPERATORS:
            raise ValidationError(f"operator must be one of {', '.join(OPERATORS)}, got {self.operator!r}")
        if self.profile not in PROFILES:
            raise ValidationError(f"profile must be one of {', '.join(PROFILES)}, got {self.profile!r}")
        if self.input_spec.get("kind") not in INPUT_KINDS:
            raise ValidationError(f"input kind must be one of {', '.join(INPUT_KINDS)}")
        if self.ell_range[0] > self.ell_range[1]:
            raise ValidationError(f"ell_min {self.ell_range[0]} exceeds ell_max {self.ell_range[1]}")
        if int(self.threads) < 1:
            raise ValidationError(f"threads must be at least 1, got {self.threads}")
        _ = self.rectangle_filter
        _ = self.self_cell_rule
        try:
            CorpusKind(self.document["corpus"]["kind"])
        except ValueError as e:
            raise ValidationError(f"unknown corpus kind {self.document['corpus']['kind']!r}") from e
        self.weight_family().validate(cfg, self.t)

    @classmethod
    def load(cls, path: Path | None = None, overrides: dict | None = None) -> "RunConfig":
        document = default_document()
        if path is not None:
            file_document = read_json(path)
            if not isinstance(file_document, dict):
                raise ValidationError(f"{path}: the configuration must be a JSON object")
            document = merge_document(document, file_document, str(path))
            logger.info("Loaded configuration from %s", path)
        if overrides:
            document = merge_document(document, overrides, "command line")
        return cls(document)

    def __getattr__(self, name):
        if name in SCALAR_KEYS:
            return self.document[name]
        raise AttributeError(name)

    @cached_property
    def grid(self) -> ProductGrid:
        try:
            return ProductGrid.from_dict(self.document["grid"])
        except (TypeError, ValueError) as e:
            raise ValidationError(f"invalid grid section: {e}") from e

    @cached_property
    def exponents(self) -> ExponentConfig:
        e = self.document["exponents"]
        try:
            return ExponentConfig.for_grid(self.grid, e["alpha"], e["beta"], e["p"], e.get("q"), e["theta"])
        except (TypeError, ValueError) as err:
            raise ValidationError(f"invalid exponents section: {err}") from err

    @property
    def t(self) -> float:
        return float(self.document["exponents"]["t"])

    @property
    def ell_range(self) -> tuple[int, int]:
        return int(self.document["ell_min"]), int(self.document["ell_max"])

    @cached_property
    def rectangle_filter(self) -> RectangleFilter:
        spec = self.document["filter"]
        kind = str(spec.get("kind", "ALL")).upper()
        if kind == "ALL":
            return RectangleFilter.all()
        if kind == "DIAGONAL":
            return RectangleFilter.diagonal()
        if kind == "ECCENTRICITY":
            if spec.get("ell") is None:
                raise ValidationError("ECCENTRICITY filter needs an ell")
            return RectangleFilter.eccentricity(int(spec["ell"]))
        raise ValidationError(f"unknown filter kind {spec.get('kind')!r}")

    @cached_property
    def self_cell_rule(self) -> SelfCellRule | None:
        rule = self.document["self_cell_rule"]
        if rule is None:
            return None
        try:
            return SelfCellRule(str(rule).upper())
        except ValueError as e:
            raise ValidationError(f"unknown self-cell rule {rule!r}") from e

    @property
    def weights_spec(self) -> dict:
        return self.document["weights"]

    @property
    def corpus_spec(self) -> dict:
        return self.document["corpus"]

    @property
    def input_spec(self) -> dict:
        return self.document["input"]

    def weight_family(self):
        spec = dict(self.weights_spec)
        return build_weights(spec.pop("kind"), self.grid, spec, seed=int(self.seed))

    def to_dict(self) -> dict:
        return copy.deepcopy(self.document)
