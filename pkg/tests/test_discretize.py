# -*- coding: utf-8 -*-

import numpy as np
import pytest
import scipy.sparse as sparse

from prepinn.components import discretize
from prepinn.components.discretize import (
    DiscretizationException,
    Dual,
    LinearizationState,
    ProblemSpec,
    ResidualOperator,
    cavity_problem,
    checkerboard_index,
    field_to_unknowns,
    ns_residual,
    poisson_problem,
    poisson_residual,
    pressure_stabilization,
    residual,
    residual_jvp,
    residual_pattern,
    stabilized_jacobian,
    unknowns_to_field,
)
from prepinn.components.grid import Field, make_grid
from prepinn.components.sparsela import probe_jacobian

SQUARE = (-1.0, 1.0, -1.0, 1.0)
UNIT = (0.0, 1.0, 0.0, 1.0)


def exact_field(n, k=1):
    grid = make_grid(n, n, SQUARE)
    X, Y = np.meshgrid(grid.x_nodes(), grid.y_nodes())
    return grid, Field(grid, discretize.poisson_exact(X, Y, k), ("u",))


def test_problem_spec_validation():
    with pytest.raises(DiscretizationException):
        ProblemSpec("heat")
    with pytest.raises(DiscretizationException):
        poisson_problem(1, scheme_order=3)
    with pytest.raises(DiscretizationException):
        poisson_problem(0)
    with pytest.raises(DiscretizationException):
        cavity_problem(-1.0)
    spec = cavity_problem(100.0)
    assert spec.components == ("u", "v", "p")
    assert spec.n_residual(make_grid(4, 5, UNIT)) == 60


def test_poisson_truncation_error_is_second_order():
    errors, spacing = [], []
    for n in (16, 32):
        grid, u = exact_field(n)
        f = poisson_residual(u, grid, poisson_problem(1))
        errors.append(np.sqrt(np.mean(f * f)))
        spacing.append(grid.hx)
    assert np.log(errors[0] / errors[1]) / np.log(spacing[0] / spacing[1]) >= 1.9


def test_fourth_order_stencils_are_exact_for_quartics():
    grid = make_grid(10, 3, UNIT)
    x = grid.x_padded()
    P = np.tile(x**4, (grid.ny + 2, 1))
    d2 = discretize._d2x(P, grid.hx, 4)
    d1 = discretize._d1x(P, grid.hx, 4)
    xi = grid.x_nodes()
    np.testing.assert_allclose(d2[:, 1:-1], np.tile(12 * xi[1:-1] ** 2, (3, 1)), rtol=1e-8)
    np.testing.assert_allclose(d1[:, 1:-1], np.tile(4 * xi[1:-1] ** 3, (3, 1)), rtol=1e-8)
    # boundary-adjacent nodes fall back to the central second-order stencil
    np.testing.assert_array_equal(d2[:, 0], discretize._d2x(P, grid.hx, 2)[:, 0])
    assert not np.allclose(discretize._d2x(P, grid.hx, 2)[:, 1:-1], d2[:, 1:-1], rtol=1e-8)


def test_poisson_stencil_column():
    grid = make_grid(5, 5, SQUARE)
    op = ResidualOperator(grid, poisson_problem(1))
    d = np.zeros(op.n)
    d[grid.node_index(2, 2)] = 1.0
    col = op.jvp(np.zeros(op.n), d).reshape(grid.shape)
    hx2, hy2 = grid.hx**2, grid.hy**2
    assert col[2, 2] == pytest.approx(-2 / hx2 - 2 / hy2)
    assert col[2, 1] == pytest.approx(1 / hx2) and col[2, 3] == pytest.approx(1 / hx2)
    assert col[1, 2] == pytest.approx(1 / hy2) and col[3, 2] == pytest.approx(1 / hy2)
    assert np.count_nonzero(col) == 5


@pytest.mark.parametrize("order", [2, 4])
def test_residual_is_affine(order, cavity_op, poisson_op):
    rng = np.random.default_rng(3)
    for op in (poisson_op(6, order=order), cavity_op(6, order=order)):
        w, d = rng.standard_normal(op.n), rng.standard_normal(op.n)
        jvp = op.jvp(w, d)
        np.testing.assert_allclose(op(w + d) - op(w), jvp, rtol=1e-12, atol=1e-12 * np.abs(jvp).max())


def test_residual_jvp_on_fields():
    grid = make_grid(5, 4, UNIT)
    spec = cavity_problem(100.0)
    rng = np.random.default_rng(0)
    lin = LinearizationState(rng.standard_normal(grid.shape), rng.standard_normal(grid.shape))
    point = Field(grid, rng.standard_normal((3, 4, 5)), spec.components)
    direction = Field(grid, rng.standard_normal((3, 4, 5)), spec.components)
    op = ResidualOperator(grid, spec, lin)
    expected = op.jvp(field_to_unknowns(point, spec), field_to_unknowns(direction, spec))
    np.testing.assert_allclose(residual_jvp(point, direction, lin, grid, spec), expected)
    np.testing.assert_allclose(residual(point, grid, spec, lin), op(field_to_unknowns(point, spec)))


def test_unknown_ordering():
    grid = make_grid(3, 3, UNIT)
    spec = cavity_problem(100.0)
    values = np.stack([np.full(grid.shape, 1.0), np.full(grid.shape, 2.0), np.full(grid.shape, 3.0)])
    w = field_to_unknowns(Field(grid, values, spec.components), spec)
    np.testing.assert_array_equal(w[:6], [3.0, 1.0, 2.0, 3.0, 1.0, 2.0])
    np.testing.assert_array_equal(unknowns_to_field(w, grid, spec).values, values)


def test_lid_drives_the_top_row():
    grid = make_grid(6, 6, UNIT)
    spec = cavity_problem(100.0)
    zero = Field(grid, np.zeros((3, 6, 6)), spec.components)
    f = ns_residual(zero, LinearizationState.zeros(grid), grid, spec).reshape(6, 6, 3)
    np.testing.assert_allclose(f[-1, :, 1], -(1 / 100.0) / grid.hy**2)
    assert np.abs(f[:-1, :, 1]).max() == 0.0
    assert np.abs(f[..., 0]).max() == 0.0 and np.abs(f[..., 2]).max() == 0.0


def test_pressure_shift_leaves_residual_unchanged(cavity_op):
    op = cavity_op(6)
    rng = np.random.default_rng(1)
    w = rng.standard_normal(op.n)
    shifted = w.copy()
    shifted[0::3] += 5.0
    np.testing.assert_allclose(op(shifted), op(w), atol=1e-9)


def test_residual_rejects_mismatched_inputs():
    grid = make_grid(4, 4, SQUARE)
    other = make_grid(5, 4, SQUARE)
    spec = poisson_problem(1)
    with pytest.raises(DiscretizationException):
        poisson_residual(Field(other, np.zeros((4, 5))), grid, spec)
    with pytest.raises(DiscretizationException):
        poisson_residual(Field(grid, np.zeros((2, 4, 4))), grid, spec)
    with pytest.raises(DiscretizationException):
        ns_residual(Field(grid, np.zeros((3, 4, 4))), None, grid, cavity_problem(10.0))
    with pytest.raises(DiscretizationException):
        Dual(np.ones(2), np.ones(2)) * Dual(np.ones(2), np.ones(2))


@pytest.mark.parametrize("order", [2, 4])
def test_pattern_covers_the_jacobian(order, poisson_op, cavity_op):
    for op in (poisson_op(7, order=order), cavity_op(7, order=order)):
        J = probe_jacobian(op, np.random.default_rng(0).standard_normal(op.n))
        P = residual_pattern(op.grid, op.spec).toarray()
        assert not np.any((J != 0) & (P == 0))
        assert np.all(np.diag(P) == 1)


def test_poisson_pattern_size():
    grid = make_grid(6, 5, SQUARE)
    P = residual_pattern(grid, poisson_problem(1))
    n = grid.n_nodes
    assert P.nnz == 5 * n - 2 * grid.nx - 2 * grid.ny


def test_checkerboard_index():
    J, I = np.indices((8, 8))
    assert checkerboard_index((-1.0) ** (I + J)) == pytest.approx(1.0)
    assert checkerboard_index(np.full((8, 8), 3.0)) == 0.0
    X, Y = np.meshgrid(np.linspace(0, 1, 8), np.linspace(0, 1, 8))
    assert checkerboard_index(np.sin(np.pi * X) * np.sin(np.pi * Y)) < 0.1


def cavity_jacobian(n=8, lin=None):
    grid = make_grid(n, n, UNIT)
    op = ResidualOperator(grid, cavity_problem(100.0), lin)
    return op, sparse.csr_matrix(probe_jacobian(op, np.zeros(op.n)))


def test_stabilization_acts_on_continuity_and_pressure():
    op, J = cavity_jacobian(6)
    S = pressure_stabilization(J, op.grid, op.spec).tocoo()
    assert S.nnz > 0
    assert np.all(S.row % 3 == 0) and np.all(S.col % 3 == 0)
    a = J.diagonal()[1::3]
    # a constant pressure only feels the pin at node (0, 0)
    constant_p = np.zeros(op.n)
    constant_p[0::3] = 1.0
    hit = S.tocsr() @ constant_p
    assert np.flatnonzero(hit).tolist() == [0]
    assert hit[0] == pytest.approx((1 / op.grid.hx**2 + 1 / op.grid.hy**2) / a[0])
    # a checkerboard pressure is penalized at every node
    J2, I2 = np.indices(op.grid.shape)
    board = np.zeros(op.n)
    board[0::3] = ((-1.0) ** (I2 + J2)).ravel()
    assert np.all(np.abs((S.tocsr() @ board)[0::3]) > 0)


def test_stabilization_strength_and_poisson():
    op, J = cavity_jacobian(6)
    assert pressure_stabilization(J, op.grid, op.spec, strength=0.0).nnz == 0
    assert stabilized_jacobian(J, op.grid, op.spec, strength=0.0) is J
    half = pressure_stabilization(J, op.grid, op.spec, strength=0.5).toarray()
    np.testing.assert_allclose(2 * half, pressure_stabilization(J, op.grid, op.spec).toarray())
    with pytest.raises(DiscretizationException):
        pressure_stabilization(J, op.grid, op.spec, strength=-1.0)
    grid = make_grid(5, 5, SQUARE)
    P = sparse.identity(25, format="csr")
    assert pressure_stabilization(P, grid, poisson_problem(1)).nnz == 0


def test_stabilized_jacobian_is_nonsingular():
    op, J = cavity_jacobian(8)
    constant_p = np.zeros(op.n)
    constant_p[0::3] = 1.0
    # the constant pressure is in the null space of the cavity Jacobian
    assert np.abs(J @ constant_p).max() == 0.0
    A = stabilized_jacobian(J, op.grid, op.spec)
    assert not np.any((J.toarray() != 0) & (A.toarray() == 0))
    np.testing.assert_array_equal((A - J).toarray(), pressure_stabilization(J, op.grid, op.spec).toarray())
    assert np.linalg.cond(A.toarray()) < 1e10
