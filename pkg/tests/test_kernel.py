"""Tests for kernel factors, self-cell averages and cone labels"""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from helpers.exceptions import NotInAnyConeError, ValidationError
from helpers.grid import Factor, make_grid
from helpers.kernel import (
    NOT_IN_CONE,
    KernelSpec,
    SelfCellRule,
    cone_index,
    cone_index_squared,
    cone_labels,
    joint_kernel_matrix,
    kernel_factor,
    kernel_matrix,
    self_cell_average,
)


def test_kernel_factor_self_cell():
    assert kernel_factor(0.0, 0.0, 0.5, 0.5, 1) == pytest.approx(4.0)


def test_kernel_factor_distinct_cells():
    assert kernel_factor(0.25, 0.75, 0.5, 0.5, 1) == pytest.approx(1.41421356, abs=1e-8)


def test_kernel_factor_rejects_order():
    with pytest.raises(ValidationError):
        kernel_factor(0.0, 1.0, 0.5, 1.5, 1)


@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.9])
def test_analytic_self_average_matches_quadrature(alpha):
    h = 0.25
    half, _ = quad(lambda t: 1.0, 0.0, h / 2.0, weight="alg", wvar=(alpha - 1.0, 0.0))
    assert self_cell_average((h,), alpha, SelfCellRule.ANALYTIC_1D) == pytest.approx(2.0 * half / h, rel=1e-10)


@pytest.mark.parametrize("alpha", [0.3, 0.7])
def test_refined_self_average_one_dimension(alpha):
    h = 0.5
    analytic = self_cell_average((h,), alpha, SelfCellRule.ANALYTIC_1D)
    refined = self_cell_average((h,), alpha, SelfCellRule.REFINED_SUBGRID)
    assert refined == pytest.approx(analytic, rel=1e-10)


def test_refined_self_average_two_dimensions():
    # mean of 1/|t| over a square of side h is 4 log(1 + sqrt 2) / h
    h = 0.5
    expected = 4.0 * math.log(1.0 + math.sqrt(2.0)) / h
    assert self_cell_average((h, h), 1.0, SelfCellRule.REFINED_SUBGRID) == pytest.approx(expected, rel=1e-8)


def test_analytic_rule_is_one_dimensional():
    with pytest.raises(ValidationError):
        self_cell_average((0.5, 0.5), 1.0, SelfCellRule.ANALYTIC_1D)


def test_drop_rule():
    assert self_cell_average((0.5,), 0.5, SelfCellRule.DROP) == 0.0


def test_kernel_matrix_symmetric_and_decreasing():
    grid = make_grid(1, 1, 1.0, 1.0, 8, 8)
    k = kernel_matrix(grid, Factor.FIRST, 0.5)
    np.testing.assert_allclose(k, k.T)
    assert k[0, 0] == pytest.approx(self_cell_average((grid.h_x,), 0.5, SelfCellRule.ANALYTIC_1D))
    row = k[0]
    assert np.all(np.diff(row) < 0)


def test_kernel_matrix_two_dimensional_factor():
    grid = make_grid(2, 1, 1.0, 1.0, 4, 4)
    k = kernel_matrix(grid, Factor.FIRST, 1.0)
    assert k.shape == (16, 16)
    # cells (0, 0) and (1, 1) are sqrt 2 steps apart
    assert k[0, 5] == pytest.approx(1.0 / (math.sqrt(2.0) * grid.h_x))


def test_joint_kernel_matrix_off_diagonal():
    grid = make_grid(1, 1, 1.0, 1.0, 4, 4)
    k = joint_kernel_matrix(grid, 1.0)
    # (x0, y0) to (x1, y1): one step in each factor
    assert k[0, 5] == pytest.approx(1.0 / (math.sqrt(2.0) * grid.h_x))
    np.testing.assert_allclose(k, k.T)


@pytest.mark.parametrize(
    "dx, dy, ell",
    [
        (1.0, 1.0, 0),
        (0.5, 1.0, 1),
        (0.75, 1.0, 1),
        (0.25, 1.0, 2),
        (2.0, 1.0, -1),
        (3.0, 1.0, -1),
    ],
)
def test_cone_index(dx, dy, ell):
    assert cone_index(dx, dy) == ell
    assert 2.0 ** (-ell) <= dx / dy < 2.0 ** (-ell + 1)


@pytest.mark.parametrize("dx, dy", [(0.0, 1.0), (1.0, 0.0)])
def test_cone_index_degenerate(dx, dy):
    with pytest.raises(NotInAnyConeError):
        cone_index(dx, dy)


def test_cone_index_squared_matches_scalar(rng):
    dx = rng.integers(1, 40, size=500) * 0.125
    dy = rng.integers(1, 40, size=500) * 0.125
    vectorized = cone_index_squared(dx**2, dy**2)
    assert list(vectorized) == [cone_index(a, b) for a, b in zip(dx, dy, strict=True)]


def test_cone_labels_mark_axis_pairs():
    grid = make_grid(1, 1, 1.0, 1.0, 4, 4)
    labels = cone_labels(grid)
    assert labels.shape == (16, 16)
    assert np.all(np.diag(labels) == NOT_IN_CONE)
    # same x cell, different y cell
    assert labels[0, 1] == NOT_IN_CONE
    # dx = 1 step, dy = 2 steps
    assert labels[0, 4 + 2] == 1


def test_kernel_spec_rules_per_factor():
    spec = KernelSpec(0.5, 1, 1.2, 2)
    assert spec.rule(Factor.FIRST) == SelfCellRule.ANALYTIC_1D
    assert spec.rule(Factor.SECOND) == SelfCellRule.REFINED_SUBGRID
    assert spec.order(Factor.SECOND) == 1.2
    assert KernelSpec(0.5, 1, 0.5, 1, SelfCellRule.DROP).rule(Factor.SECOND) == SelfCellRule.DROP
    with pytest.raises(ValidationError):
        KernelSpec(0.5, 1, 2.0, 2)
