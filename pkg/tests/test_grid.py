# -*- coding: utf-8 -*-

import numpy as np
import pytest

from prepinn.components.grid import (
    BoundarySpec,
    Field,
    FixedValue,
    GridException,
    ZeroGradient,
    constant,
    coordinate_channels,
    interior,
    make_grid,
    pad,
)


def test_spacing_excludes_boundary():
    grid = make_grid(8, 4, (0.0, 1.0, 0.0, 2.0))
    assert grid.hx == pytest.approx(1 / 9)
    assert grid.hy == pytest.approx(2 / 5)
    assert grid.shape == (4, 8)
    assert grid.n_nodes == 32
    np.testing.assert_allclose(grid.x_nodes()[[0, -1]], [1 / 9, 8 / 9])
    assert grid.x_padded()[0] == 0.0 and grid.x_padded()[-1] == 1.0


@pytest.mark.parametrize(
    "nx, ny, extents",
    [
        (2, 8, (0, 1, 0, 1)),
        (8, 1, (0, 1, 0, 1)),
        (8, 8, (1, 1, 0, 1)),
        (8, 8, (0, 1, 2, 1)),
        (8, 8, (0, np.inf, 0, 1)),
        (8, 8, (0, 1, 0)),
    ],
)
def test_invalid_grid(nx, ny, extents):
    with pytest.raises(GridException):
        make_grid(nx, ny, extents)


def test_field_shapes_and_finiteness():
    grid = make_grid(3, 4, (0, 1, 0, 1))
    flat = Field(grid, np.arange(24.0), ("a", "b"))
    assert flat.values.shape == (2, 4, 3)
    np.testing.assert_array_equal(flat.component("b").ravel(), np.arange(12.0, 24.0))
    assert Field(grid, np.zeros((4, 3))).n_components == 1
    with pytest.raises(GridException):
        Field(grid, np.full((4, 3), np.nan))
    with pytest.raises(GridException):
        Field(grid, np.zeros((3, 4)))
    with pytest.raises(GridException):
        flat.component("c")
    with pytest.raises(ValueError):
        flat.values[0, 0, 0] = 1.0


def test_fixed_value_ghosts_sit_on_the_boundary():
    grid = make_grid(4, 3, (0.0, 1.0, -1.0, 1.0))
    bc = BoundarySpec.uniform(FixedValue(lambda x, y: x + 10 * y))
    P = pad(Field(grid, np.zeros(grid.shape)), bc)[0]
    assert P.shape == (5, 6)
    np.testing.assert_allclose(P[1:-1, 0], 0.0 + 10 * grid.y_nodes())
    np.testing.assert_allclose(P[1:-1, -1], 1.0 + 10 * grid.y_nodes())
    np.testing.assert_allclose(P[0, 1:-1], grid.x_nodes() - 10)
    np.testing.assert_allclose(P[-1, 1:-1], grid.x_nodes() + 10)
    np.testing.assert_array_equal(interior(P), np.zeros(grid.shape))


def test_zero_gradient_copies_adjacent_interior():
    grid = make_grid(4, 3, (0, 1, 0, 1))
    values = np.arange(12.0).reshape(3, 4)
    P = pad(Field(grid, values), BoundarySpec.uniform(ZeroGradient()))[0]
    np.testing.assert_array_equal(P[1:-1, 0], values[:, 0])
    np.testing.assert_array_equal(P[1:-1, -1], values[:, -1])
    np.testing.assert_array_equal(P[0, 1:-1], values[0])
    np.testing.assert_array_equal(P[-1, 1:-1], values[-1])
    assert P[0, 0] == 0.5 * (values[0, 0] + values[0, 0])


def test_homogeneous_padding_zeroes_fixed_values():
    grid = make_grid(3, 3, (0, 1, 0, 1))
    bc = BoundarySpec.uniform(constant(7.0))
    values = np.ones(grid.shape)
    P = pad(Field(grid, values), bc, homogeneous=True)[0]
    assert P[0].sum() == 0 and P[:, 0].sum() == 0
    np.testing.assert_array_equal(interior(P), values)
    assert pad(Field(grid, values), bc)[0][0, 1] == 7.0


def test_lid_corners_belong_to_the_moving_wall():
    grid = make_grid(4, 4, (0, 1, 0, 1))
    zero, lid = constant(0.0), constant(1.0)
    bc = BoundarySpec(
        ({"left": zero, "right": zero, "bottom": zero, "top": lid},), corner_owner=("top",)
    )
    P = pad(Field(grid, np.zeros(grid.shape)), bc)[0]
    assert P[-1, 0] == 1.0 and P[-1, -1] == 1.0
    assert P[0, 0] == 0.0 and P[0, -1] == 0.0
    np.testing.assert_array_equal(P[-1, 1:-1], np.ones(4))


def test_boundary_spec_validation():
    with pytest.raises(GridException):
        BoundarySpec(({"left": ZeroGradient()},))
    with pytest.raises(GridException):
        BoundarySpec.uniform(ZeroGradient()).__class__(
            BoundarySpec.uniform(ZeroGradient()).rules, corner_owner=("middle",)
        )
    grid = make_grid(3, 3, (0, 1, 0, 1))
    with pytest.raises(GridException):
        pad(Field(grid, np.zeros((2, 3, 3))), BoundarySpec.uniform(ZeroGradient()))


def test_coordinate_channels():
    grid = make_grid(5, 3, (-1, 1, 0, 2))
    coords = coordinate_channels(grid)
    assert coords.names == ("x", "y")
    np.testing.assert_allclose(coords.component("x")[2], grid.x_nodes())
    np.testing.assert_allclose(coords.component("y")[:, 4], grid.y_nodes())
