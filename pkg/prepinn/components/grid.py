# -*- coding: utf-8 -*-

from __future__ import absolute_import, annotations, unicode_literals

import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from prepinn.utils import PrepinnException

log = logging.getLogger("grid")

EDGES = ("left", "right", "bottom", "top")

# the two edges meeting at each corner of the padded array, as (row, column) of the corner
CORNERS = {
    (0, 0): ("bottom", "left"),
    (0, -1): ("bottom", "right"),
    (-1, 0): ("top", "left"),
    (-1, -1): ("top", "right"),
}


class GridException(PrepinnException):
    pass


@dataclass(frozen=True)
class StructuredGrid:
    """
    Uniform lattice of `nx` x `ny` interior nodes. The boundary ring is not part of the
    grid; it is supplied by padding. Interior node (i, j) sits at
    x = x_min + (i+1)*hx, y = y_min + (j+1)*hy.
    """

    nx: int
    ny: int
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise GridException(f"Node counts must be integers, found nx={self.nx}, ny={self.ny}.")
        if self.nx < 3 or self.ny < 3:
            raise GridException(
                f"The grid needs at least 3 interior nodes per direction, found nx={self.nx}, ny={self.ny}."
            )
        if not (np.isfinite([self.x_min, self.x_max, self.y_min, self.y_max]).all()):
            raise GridException("The domain extents must be finite.")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise GridException(
                f"Degenerate domain [{self.x_min}, {self.x_max}] x [{self.y_min}, {self.y_max}]."
            )

    @property
    def hx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx + 1)

    @property
    def hy(self) -> float:
        return (self.y_max - self.y_min) / (self.ny + 1)

    @property
    def n_nodes(self) -> int:
        return self.nx * self.ny

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def extents(self) -> Tuple[float, float, float, float]:
        return (self.x_min, self.x_max, self.y_min, self.y_max)

    def x_nodes(self) -> np.ndarray:
        return self.x_min + (np.arange(self.nx) + 1) * self.hx

    def y_nodes(self) -> np.ndarray:
        return self.y_min + (np.arange(self.ny) + 1) * self.hy

    def x_padded(self) -> np.ndarray:
        """
        x coordinates of the padded columns; the ghost columns sit on the boundary.
        """
        x = self.x_min + np.arange(self.nx + 2) * self.hx
        x[-1] = self.x_max
        return x

    def y_padded(self) -> np.ndarray:
        y = self.y_min + np.arange(self.ny + 2) * self.hy
        y[-1] = self.y_max
        return y

    def node_index(self, i, j):
        return j * self.nx + i

    def __str__(self):
        return (
            f"{self.nx}x{self.ny} on [{self.x_min:g}, {self.x_max:g}]x[{self.y_min:g}, {self.y_max:g}], "
            + f"hx={self.hx:.6g}, hy={self.hy:.6g}"
        )


def make_grid(nx: int, ny: int, extents: Sequence[float]) -> StructuredGrid:
    """
    Create a grid of `nx` x `ny` interior nodes on extents (x_min, x_max, y_min, y_max).
    """
    if len(extents) != 4:
        raise GridException(f"Four extents are required, found {len(extents)}.")
    x_min, x_max, y_min, y_max = [float(x) for x in extents]
    return StructuredGrid(int(nx), int(ny), x_min, x_max, y_min, y_max)


@dataclass(frozen=True, eq=False)
class Field:
    """
    Node values of one or more scalar components. `values` has shape (components, ny, nx),
    so its flat view is component by component with i running fastest.
    """

    grid: StructuredGrid
    values: np.ndarray
    names: Tuple[str, ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        n = self.grid.n_nodes
        if values.ndim == 1:
            if values.size % n != 0:
                raise GridException(
                    f"A flat field of length {values.size} does not fit a grid of {n} nodes."
                )
            values = values.reshape(-1, self.grid.ny, self.grid.nx)
        elif values.ndim == 2:
            values = values.reshape(1, *values.shape)
        if values.shape[1:] != self.grid.shape:
            raise GridException(
                f"Field shape {values.shape[1:]} does not match the grid shape {self.grid.shape}."
            )
        if not np.isfinite(values).all():
            raise GridException("The field contains non-finite values.")
        names = tuple(self.names) or tuple(f"c{x}" for x in range(values.shape[0]))
        if len(names) != values.shape[0]:
            raise GridException(
                f"{len(names)} component names given for {values.shape[0]} components."
            )
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", names)

    @property
    def n_components(self) -> int:
        return self.values.shape[0]

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def component(self, name: Union[str, int]) -> np.ndarray:
        if isinstance(name, str):
            if name not in self.names:
                raise GridException(f"The field has no component '{name}'.")
            name = self.names.index(name)
        return self.values[name]


@dataclass(frozen=True)
class FixedValue:
    """
    Dirichlet rule; `fn(x, y)` is evaluated at the physical location of each ghost node.
    """

    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def evaluate(self, x, y):
        return np.broadcast_to(np.asarray(self.fn(x, y), dtype=np.float64), np.shape(x))


@dataclass(frozen=True)
class ZeroGradient:
    pass


Rule = Union[FixedValue, ZeroGradient]


def constant(value: float) -> FixedValue:
    return FixedValue(lambda x, y: np.full(np.shape(x), float(value)))


@dataclass(frozen=True)
class BoundarySpec:
    """
    One rule per (edge, component). `corner_owner` optionally names, per component, an
    edge whose FixedValue rule also fills the two corner ghosts it touches; the other
    corners take the average of their two edge-ghost neighbors.
    """

    rules: Tuple[Mapping[str, Rule], ...]
    corner_owner: Tuple[Optional[str], ...] = field(default=())

    def __post_init__(self):
        for c, r in enumerate(self.rules):
            if set(r.keys()) != set(EDGES):
                raise GridException(
                    f"Component {c} must have exactly one rule per edge {EDGES}, found {sorted(r.keys())}."
                )
            for e, rule in r.items():
                if not isinstance(rule, (FixedValue, ZeroGradient)):
                    raise GridException(f"Invalid boundary rule {rule} on edge {e}.")
        owners = tuple(self.corner_owner) or (None,) * len(self.rules)
        if len(owners) != len(self.rules):
            raise GridException("corner_owner must name one edge (or None) per component.")
        for o in owners:
            if o is not None and o not in EDGES:
                raise GridException(f"Invalid corner owner '{o}'.")
        object.__setattr__(self, "corner_owner", owners)

    @property
    def n_components(self) -> int:
        return len(self.rules)

    @classmethod
    def uniform(cls, rule: Rule, n_components: int = 1) -> "BoundarySpec":
        return cls(tuple({e: rule for e in EDGES} for _ in range(n_components)))


def pad_component(values, rules, grid, homogeneous=False, corner_owner=None):
    """
    Pad a single (ny, nx) component with one ghost layer. With `homogeneous` the FixedValue
    data is replaced by zero, which gives the linear part of the (affine) padding map.
    """
    ny, nx = grid.shape
    P = np.zeros((ny + 2, nx + 2), dtype=np.float64)
    P[1:-1, 1:-1] = values
    xs, ys = grid.x_padded(), grid.y_padded()

    def _fixed(rule, x, y):
        return np.zeros(np.shape(x)) if homogeneous else rule.evaluate(x, y)

    edges = {
        "left": ((slice(1, -1), 0), (slice(1, -1), 1), lambda: (np.full(ny, xs[0]), ys[1:-1])),
        "right": ((slice(1, -1), -1), (slice(1, -1), -2), lambda: (np.full(ny, xs[-1]), ys[1:-1])),
        "bottom": ((0, slice(1, -1)), (1, slice(1, -1)), lambda: (xs[1:-1], np.full(nx, ys[0]))),
        "top": ((-1, slice(1, -1)), (-2, slice(1, -1)), lambda: (xs[1:-1], np.full(nx, ys[-1]))),
    }
    for edge in EDGES:
        ghost, inner, coords = edges[edge]
        rule = rules[edge]
        if isinstance(rule, FixedValue):
            P[ghost] = _fixed(rule, *coords())
        else:
            P[ghost] = P[inner]

    for (r, c), (e1, e2) in CORNERS.items():
        if corner_owner in (e1, e2) and isinstance(rules[corner_owner], FixedValue):
            x, y = np.array([xs[c]]), np.array([ys[r]])
            P[r, c] = _fixed(rules[corner_owner], x, y)[0]
        else:
            # neighbors of the corner along the row and along the column
            P[r, c] = 0.5 * (P[r, 1 if c == 0 else -2] + P[1 if r == 0 else -2, c])
    return P


def pad(field: Field, bc: BoundarySpec, homogeneous=False) -> np.ndarray:
    """
    Return the padded array of shape (components, ny+2, nx+2): interior copied verbatim,
    the ghost ring filled per the boundary rules.
    """
    if field.n_components != bc.n_components:
        raise GridException(
            f"The field has {field.n_components} components but the boundary spec has {bc.n_components}."
        )
    return np.stack(
        [
            pad_component(
                field.values[c], bc.rules[c], field.grid, homogeneous, bc.corner_owner[c]
            )
            for c in range(field.n_components)
        ]
    )


def interior(padded: np.ndarray) -> np.ndarray:
    return padded[..., 1:-1, 1:-1]


def coordinate_channels(grid: StructuredGrid) -> Field:
    """
    Two-component field holding the x and y coordinates of every interior node.
    """
    X, Y = np.meshgrid(grid.x_nodes(), grid.y_nodes())
    return Field(grid, np.stack([X, Y]), ("x", "y"))
