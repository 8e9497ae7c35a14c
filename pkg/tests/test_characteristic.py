"""Tests for bump characteristics, suprema and dilation identities"""

import math

import numpy as np
import pytest

from helpers.characteristic import (
    TABLE_COLUMNS,
    WeightPair,
    b_quantity,
    b_ratio_probe,
    bump_characteristic_rectangle,
    bump_characteristic_sup,
    characteristic_dilation_sides,
)
from helpers.exceptions import EmptyFamilyError, TrivialWeightError, ValidationError
from helpers.grid import (
    ExponentConfig,
    Factor,
    GridFunction,
    RectangleFilter,
    enumerate_dyadic_rectangles,
    make_grid,
    make_rectangle,
)
from helpers.weights import PowerWeights, UnitWeights


def _unit(grid):
    return UnitWeights().sample(grid)


def test_unit_weights_on_unit_rectangle():
    grid = make_grid(1, 1, 0.5, 0.5, 2, 2)
    cfg = ExponentConfig.for_grid(grid, 0.5, 0.5, 2.0)
    r = make_rectangle(grid, [0], 2, [0], 2)
    assert bump_characteristic_rectangle(_unit(grid), r, cfg, 2.0) == pytest.approx(1.0)


def test_unit_weights_long_first_side():
    grid = make_grid(1, 1, 1.0, 0.5, 2, 2)
    cfg = ExponentConfig.for_grid(grid, 0.5, 0.5, 2.0)
    r = make_rectangle(grid, [0], 2, [0], 2)
    assert bump_characteristic_rectangle(_unit(grid), r, cfg, 2.0) == pytest.approx(math.sqrt(2.0))


@pytest.mark.parametrize("t", [1.5, 2.0, 3.0])
def test_b_quantity_of_unit_weights(t):
    grid = make_grid(1, 1, 1.0, 1.0, 2, 2)
    r = make_rectangle(grid, [0], 2, [0], 2)
    assert b_quantity(_unit(grid), r, 2.0, t) == pytest.approx(4.0 ** (1.0 / t))


def test_zero_omega_gives_zero(grid8, cfg8):
    zero = GridFunction.zeros(grid8)
    one = GridFunction.constant(grid8, 1.0)
    r = make_rectangle(grid8, [0], 4, [0], 4)
    assert bump_characteristic_rectangle(WeightPair(zero, one), r, cfg8, 2.0) == 0.0


def test_vanishing_sigma_is_trivial(grid8, cfg8):
    one = GridFunction.constant(grid8, 1.0)
    sigma = np.ones(grid8.size)
    sigma[9] = 0.0
    w = WeightPair(one, GridFunction(grid8, sigma))
    with pytest.raises(TrivialWeightError):
        b_quantity(w, make_rectangle(grid8, [0], 2, [0], 2), 2.0, 2.0)
    with pytest.raises(TrivialWeightError):
        bump_characteristic_sup(w, cfg8, 2.0)
    # rectangles away from the zero are fine
    assert b_quantity(w, make_rectangle(grid8, [4], 4, [4], 4), 2.0, 2.0) > 0
    with pytest.raises(TrivialWeightError):
        bump_characteristic_rectangle(w, make_rectangle(grid8, [1], 1, [1], 1), cfg8, 2.0)
    with pytest.raises(TrivialWeightError):
        bump_characteristic_sup(w, cfg8, 2.0, RectangleFilter.diagonal())


def test_weight_pair_validation(grid8, grid4):
    with pytest.raises(ValidationError):
        WeightPair(GridFunction.constant(grid8, -1.0), GridFunction.constant(grid8, 1.0))
    with pytest.raises(ValidationError):
        WeightPair(GridFunction.constant(grid8, 1.0), GridFunction.constant(grid4, 1.0))


def test_tensor_weights_factorize(grid8, cfg8, rng):
    ox, oy = rng.uniform(0.5, 2.0, 8), rng.uniform(0.5, 2.0, 8)
    sx, sy = rng.uniform(0.5, 2.0, 8), rng.uniform(0.5, 2.0, 8)
    w = WeightPair(GridFunction.product(grid8, ox, oy), GridFunction.product(grid8, sx, sy))
    r = make_rectangle(grid8, [2], 2, [4], 4)
    p, t = 2.0, 2.0
    h = grid8.h_x

    def factor(o, s, sl):
        a = (np.sum(o[sl] ** (p * t)) * h) ** (1.0 / (p * t))
        b = (np.sum(s[sl] ** (-p * t / (p - 1.0))) * h) ** ((p - 1.0) / (p * t))
        return a * b

    expected = factor(ox, sx, slice(2, 4)) * factor(oy, sy, slice(4, 8))
    assert b_quantity(w, r, p, t) == pytest.approx(expected, rel=1e-12)


def test_sup_of_unit_weights_is_full_box(grid8, cfg8):
    report = bump_characteristic_sup(_unit(grid8), cfg8, 2.0, RectangleFilter.all())
    assert report.value == pytest.approx(2.0)
    assert report.argmax.q_side == 8 and report.argmax.p_side == 8
    assert report.family_size == 15 * 15
    assert report.family == "ALL"


def test_sup_matches_brute_force(grid8, cfg8, random_w8):
    w = random_w8
    family = RectangleFilter.eccentricity(1)
    report = bump_characteristic_sup(w, cfg8, 2.5, family, keep_table=True)
    values = [bump_characteristic_rectangle(w, r, cfg8, 2.5) for r in enumerate_dyadic_rectangles(grid8, family)]
    assert report.value == pytest.approx(max(values), rel=1e-12)
    assert report.family_size == len(values)
    assert bump_characteristic_rectangle(w, report.argmax, cfg8, 2.5) == pytest.approx(report.value, rel=1e-12)

    table = report.per_rectangle_values
    assert list(table.columns) == TABLE_COLUMNS
    assert len(table) == len(values)
    assert table["value"].max() == pytest.approx(report.value)
    assert set(table["ell"]) == {1}


def test_diagonal_equals_eccentricity_zero(grid8, cfg8, random_w8):
    w = random_w8
    diagonal = bump_characteristic_sup(w, cfg8, 2.0, RectangleFilter.diagonal()).to_dict()
    zero = bump_characteristic_sup(w, cfg8, 2.0, RectangleFilter.eccentricity(0)).to_dict()
    assert diagonal.pop("family") == "DIAGONAL"
    assert zero.pop("family") == "ECCENTRICITY(0)"
    assert diagonal == zero


def test_empty_family(grid8, cfg8):
    with pytest.raises(EmptyFamilyError):
        bump_characteristic_sup(_unit(grid8), cfg8, 2.0, RectangleFilter.eccentricity(10))


def test_bump_exponent_out_of_range(grid8, cfg8):
    with pytest.raises(ValidationError):
        bump_characteristic_sup(_unit(grid8), cfg8, 3.5)


def test_holder_monotone_in_t(grid8, cfg8, random_w8):
    w = random_w8
    ts = [1.2, 1.5, 2.0, 2.5, 3.0]
    for r in enumerate_dyadic_rectangles(grid8)[::7]:
        values = [bump_characteristic_rectangle(w, r, cfg8, t) for t in ts]
        assert all(a <= b * (1.0 + 1e-12) for a, b in zip(values, values[1:], strict=False))
    sups = [bump_characteristic_sup(w, cfg8, t).value for t in ts]
    assert sups == sorted(sups)


def test_scale_homogeneity(grid8, cfg8, random_w8):
    w = random_w8
    base = bump_characteristic_sup(w, cfg8, 2.0).value
    assert bump_characteristic_sup(w.scaled(omega_factor=3.0), cfg8, 2.0).value == pytest.approx(3.0 * base)
    assert bump_characteristic_sup(w.scaled(sigma_factor=4.0), cfg8, 2.0).value == pytest.approx(base / 4.0)


def test_q_form_with_q_equal_p_is_plain_form(grid8, cfg8, random_w8):
    w = random_w8
    r = make_rectangle(grid8, [0], 2, [4], 4)
    plain = bump_characteristic_rectangle(w, r, cfg8, 2.0)
    averaged = bump_characteristic_rectangle(w, r, cfg8, 2.0, use_q_form=True)
    assert averaged == pytest.approx(plain, rel=1e-12)


def test_q_form_sup_matches_rectangles(grid8, random_w8):
    cfg = ExponentConfig.for_grid(grid8, 0.5, 0.5, 2.0, q=4.0)
    w = random_w8
    report = bump_characteristic_sup(w, cfg, 2.0, use_q_form=True)
    values = [
        bump_characteristic_rectangle(w, r, cfg, 2.0, use_q_form=True) for r in enumerate_dyadic_rectangles(grid8)
    ]
    assert report.value == pytest.approx(max(values), rel=1e-12)


@pytest.mark.parametrize("ell", [0, 1, 2])
def test_b_ratio_probe_unit_weights(grid8, ell):
    r = make_rectangle(grid8, [0], 8, [0], 2)
    probe = b_ratio_probe(_unit(grid8), r, 2.0, 2.0, ell, 0.5)
    assert probe["ratio"] == pytest.approx(2.0 ** (-ell / 2.0))
    assert probe["bound"] == pytest.approx(2.0 ** (ell * (0.5 - 0.5)))
    assert probe["holds"]


def test_b_ratio_probe_nested_is_at_most_one(grid8, random_w8):
    w = random_w8
    for r in enumerate_dyadic_rectangles(grid8):
        if r.q_side >= 2:
            assert b_ratio_probe(w, r, 2.0, 2.0, 1, 0.5)["ratio"] <= 1.0


@pytest.mark.parametrize(
    "ell, factor",
    [(1, Factor.FIRST), (2, Factor.FIRST), (-1, Factor.SECOND), (-2, Factor.SECOND)],
)
def test_characteristic_dilation_identity(grid8, cfg8, ell, factor):
    weights = PowerWeights.for_grid(grid8)
    r = make_rectangle(grid8, [2], 4, [0], 2)
    lhs, rhs = characteristic_dilation_sides(weights, grid8, r, cfg8, 2.0, ell, factor)
    assert lhs > 0
    assert lhs == pytest.approx(rhs, rel=1e-9)


def test_characteristic_dilation_sign_checks(grid8, cfg8):
    weights = PowerWeights.for_grid(grid8)
    r = make_rectangle(grid8, [0], 2, [0], 2)
    with pytest.raises(ValidationError):
        characteristic_dilation_sides(weights, grid8, r, cfg8, 2.0, 0, Factor.FIRST)
    with pytest.raises(ValidationError):
        characteristic_dilation_sides(weights, grid8, r, cfg8, 2.0, 1, Factor.SECOND)
