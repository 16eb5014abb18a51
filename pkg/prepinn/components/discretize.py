# -*- coding: utf-8 -*-

from __future__ import absolute_import, annotations, unicode_literals

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sparse

from prepinn.utils import PrepinnException

from .grid import (
    BoundarySpec,
    Field,
    FixedValue,
    StructuredGrid,
    ZeroGradient,
    constant,
    pad_component,
)

log = logging.getLogger("discretize")

POISSON = "poisson"
CAVITY = "cavity"


class DiscretizationException(PrepinnException):
    pass


@dataclass(frozen=True)
class ProblemSpec:
    """
    Which PDE is discretized and how. `k` applies to Poisson, `re` and `lid_velocity`
    to the cavity.
    """

    kind: str
    k: int = 1
    re: float = 100.0
    scheme_order: int = 2
    lid_velocity: float = 1.0

    def __post_init__(self):
        if self.kind not in (POISSON, CAVITY):
            raise DiscretizationException(f"Unknown problem kind '{self.kind}'.")
        if self.scheme_order not in (2, 4):
            raise DiscretizationException(
                f"The scheme order must be 2 or 4, found {self.scheme_order}."
            )
        if self.kind == POISSON and (int(self.k) != self.k or self.k < 1):
            raise DiscretizationException(f"The Poisson frequency k must be an integer >= 1, found {self.k}.")
        if self.kind == CAVITY and not self.re > 0:
            raise DiscretizationException(f"The Reynolds number must be positive, found {self.re}.")

    @property
    def components(self) -> Tuple[str, ...]:
        return ("u",) if self.kind == POISSON else ("u", "v", "p")

    @property
    def unknown_order(self) -> Tuple[str, ...]:
        # per-node order of the unknowns; pairs p with continuity on the diagonal
        return ("u",) if self.kind == POISSON else ("p", "u", "v")

    @property
    def equations(self) -> Tuple[str, ...]:
        return ("poisson",) if self.kind == POISSON else ("continuity", "x_momentum", "y_momentum")

    @property
    def n_eq(self) -> int:
        return len(self.equations)

    def n_residual(self, grid: StructuredGrid) -> int:
        return self.n_eq * grid.n_nodes


def poisson_problem(k: int, scheme_order: int = 2) -> ProblemSpec:
    return ProblemSpec(POISSON, k=k, scheme_order=scheme_order)


def cavity_problem(re: float, scheme_order: int = 2, lid_velocity: float = 1.0) -> ProblemSpec:
    return ProblemSpec(CAVITY, re=re, scheme_order=scheme_order, lid_velocity=lid_velocity)


def poisson_exact(x, y, k):
    return np.sin(k * np.pi * x) * np.sin(np.pi * y)


def poisson_source(x, y, k):
    return -(np.pi**2) * (k**2 + 1) * np.sin(k * np.pi * x) * np.sin(np.pi * y)


def boundary_spec(spec: ProblemSpec) -> BoundarySpec:
    """
    Poisson: the exact solution on every edge. Cavity: moving lid on top for u, no-slip
    elsewhere, zero normal gradient for p.
    """
    if spec.kind == POISSON:
        return BoundarySpec.uniform(FixedValue(lambda x, y: poisson_exact(x, y, spec.k)))
    zero = constant(0.0)
    lid = constant(spec.lid_velocity)
    walls = {"left": zero, "right": zero, "bottom": zero}
    return BoundarySpec(
        (
            dict(walls, top=lid),
            dict(walls, top=zero),
            {e: ZeroGradient() for e in ("left", "right", "bottom", "top")},
        ),
        corner_owner=("top", None, None),
    )


@dataclass(frozen=True, eq=False)
class LinearizationState:
    """
    Frozen convective velocities taken from an earlier network output.
    """

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        for name in ("u", "v"):
            a = np.array(getattr(self, name), dtype=np.float64)
            if not np.isfinite(a).all():
                raise DiscretizationException(f"The frozen velocity {name} has non-finite entries.")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if self.u.shape != self.v.shape:
            raise DiscretizationException("The frozen velocities have different shapes.")

    @classmethod
    def from_field(cls, field: Field) -> "LinearizationState":
        return cls(field.component("u"), field.component("v"))

    @classmethod
    def zeros(cls, grid: StructuredGrid) -> "LinearizationState":
        return cls(np.zeros(grid.shape), np.zeros(grid.shape))


class Dual:
    """
    A (value, tangent) pair for forward-mode evaluation of the affine residual operators.
    Only the operations the stencils use are supported: sums, products with constants
    and linear maps via `apply`.
    """

    __array_ufunc__ = None

    def __init__(self, value, tangent):
        self.value = value
        self.tangent = tangent

    def apply(self, fn):
        return Dual(fn(self.value), fn(self.tangent))

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value + other.value, self.tangent + other.tangent)
        return Dual(self.value + other, self.tangent)

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.value, -self.tangent)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Dual):
            raise DiscretizationException("Products of two dual numbers are not affine.")
        return Dual(self.value * other, self.tangent * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * (1.0 / other)


def _lin(fn, X):
    return X.apply(fn) if isinstance(X, Dual) else fn(X)


def _d1x(P, h, order):
    d = (P[1:-1, 2:] - P[1:-1, :-2]) / (2 * h)
    if order == 4 and d.shape[1] > 2:
        Q = P[1:-1]
        m = (Q[:, :-4] - 8 * Q[:, 1:-3] + 8 * Q[:, 3:-1] - Q[:, 4:]) / (12 * h)
        d = np.concatenate([d[:, :1], m, d[:, -1:]], axis=1)
    return d


def _d2x(P, h, order):
    d = (P[1:-1, 2:] - 2 * P[1:-1, 1:-1] + P[1:-1, :-2]) / h**2
    if order == 4 and d.shape[1] > 2:
        Q = P[1:-1]
        m = (-Q[:, :-4] + 16 * Q[:, 1:-3] - 30 * Q[:, 2:-2] + 16 * Q[:, 3:-1] - Q[:, 4:]) / (
            12 * h**2
        )
        d = np.concatenate([d[:, :1], m, d[:, -1:]], axis=1)
    return d


def _d1y(P, h, order):
    return _d1x(P.T, h, order).T


def _d2y(P, h, order):
    return _d2x(P.T, h, order).T


def _pad(values, direction, bc, c, grid):
    P = pad_component(values, bc.rules[c], grid, False, bc.corner_owner[c])
    if direction is None:
        return P
    return Dual(P, pad_component(direction, bc.rules[c], grid, True, bc.corner_owner[c]))


def _pack(eqs):
    """
    Node-major, equation-minor flattening of a list of (ny, nx) equation arrays.
    """
    if isinstance(eqs[0], Dual):
        return Dual(_pack([e.value for e in eqs]), _pack([e.tangent for e in eqs]))
    return np.stack(eqs, axis=-1).reshape(-1)


def _check(field, grid, spec, kind):
    if spec.kind != kind:
        raise DiscretizationException(f"Expected a {kind} problem, found {spec.kind}.")
    if field.grid != grid:
        raise DiscretizationException("The field and the grid do not match.")
    if field.n_components != len(spec.components):
        raise DiscretizationException(
            f"The {kind} residual needs {len(spec.components)} components, found {field.n_components}."
        )


def _poisson(values, direction, grid, spec):
    o, hx, hy = spec.scheme_order, grid.hx, grid.hy
    U = _pad(values[0], None if direction is None else direction[0], boundary_spec(spec), 0, grid)
    X, Y = np.meshgrid(grid.x_nodes(), grid.y_nodes())
    lap = _lin(lambda P: _d2x(P, hx, o) + _d2y(P, hy, o), U)
    return _pack([lap - poisson_source(X, Y, spec.k)])


def _navier_stokes(values, direction, lin, grid, spec):
    o, hx, hy = spec.scheme_order, grid.hx, grid.hy
    bc = boundary_spec(spec)
    U, V, P = [
        _pad(values[c], None if direction is None else direction[c], bc, c, grid)
        for c in range(3)
    ]
    uf, vf, nu = lin.u, lin.v, 1.0 / spec.re

    def ddx(X):
        return _lin(lambda A: _d1x(A, hx, o), X)

    def ddy(X):
        return _lin(lambda A: _d1y(A, hy, o), X)

    def lap(X):
        return _lin(lambda A: _d2x(A, hx, o) + _d2y(A, hy, o), X)

    continuity = ddx(U) + ddy(V)
    x_momentum = uf * ddx(U) + vf * ddy(U) + ddx(P) - nu * lap(U)
    y_momentum = uf * ddx(V) + vf * ddy(V) + ddy(P) - nu * lap(V)
    return _pack([continuity, x_momentum, y_momentum])


def poisson_residual(u: Field, grid: StructuredGrid, spec: ProblemSpec) -> np.ndarray:
    """
    Central-difference Laplacian of the padded field minus the source term, one entry per node.
    """
    _check(u, grid, spec, POISSON)
    return _poisson(u.values, None, grid, spec)


def ns_residual(
    uvp: Field, lin: LinearizationState, grid: StructuredGrid, spec: ProblemSpec
) -> np.ndarray:
    """
    Continuity, x- and y-momentum with the convective velocities frozen at `lin`;
    three entries per node.
    """
    _check(uvp, grid, spec, CAVITY)
    if lin is None or lin.u.shape != grid.shape:
        raise DiscretizationException("The linearization state does not match the grid.")
    return _navier_stokes(uvp.values, None, lin, grid, spec)


def residual(
    field: Field, grid: StructuredGrid, spec: ProblemSpec, lin: Optional[LinearizationState] = None
) -> np.ndarray:
    if spec.kind == POISSON:
        return poisson_residual(field, grid, spec)
    return ns_residual(field, lin, grid, spec)


def residual_jvp(
    point: Field,
    direction: Field,
    lin: Optional[LinearizationState],
    grid: StructuredGrid,
    spec: ProblemSpec,
) -> np.ndarray:
    """
    Directional derivative of the residual at `point` along `direction`, evaluated on dual numbers.
    """
    residual(point, grid, spec, lin)
    if direction.values.shape != point.values.shape:
        raise DiscretizationException("The direction does not conform to the point.")
    if spec.kind == POISSON:
        d = _poisson(point.values, direction.values, grid, spec)
    else:
        d = _navier_stokes(point.values, direction.values, lin, grid, spec)
    return d.tangent


def field_to_unknowns(field: Field, spec: ProblemSpec) -> np.ndarray:
    """
    Node-major unknown vector; at each node the unknowns follow `spec.unknown_order`.
    """
    idx = [spec.components.index(c) for c in spec.unknown_order]
    return np.ascontiguousarray(np.moveaxis(field.values[idx], 0, -1)).reshape(-1)


def unknowns_to_values(w: np.ndarray, grid: StructuredGrid, spec: ProblemSpec) -> np.ndarray:
    nc = len(spec.components)
    a = np.moveaxis(np.asarray(w, dtype=np.float64).reshape(grid.ny, grid.nx, nc), -1, 0)
    idx = [spec.unknown_order.index(c) for c in spec.components]
    return a[idx]


def unknowns_to_field(w: np.ndarray, grid: StructuredGrid, spec: ProblemSpec) -> Field:
    return Field(grid, unknowns_to_values(w, grid, spec), spec.components)


class ResidualOperator:
    """
    The residual as a map on unknown vectors for a fixed grid, problem and linearization.
    This is what the Jacobian assembly and the trainer work with.
    """

    def __init__(self, grid: StructuredGrid, spec: ProblemSpec, lin: Optional[LinearizationState] = None):
        if spec.kind == CAVITY and lin is None:
            lin = LinearizationState.zeros(grid)
        self.grid = grid
        self.spec = spec
        self.lin = lin

    @property
    def n(self) -> int:
        return self.spec.n_residual(self.grid)

    def __call__(self, w: np.ndarray) -> np.ndarray:
        values = unknowns_to_values(w, self.grid, self.spec)
        if self.spec.kind == POISSON:
            return _poisson(values, None, self.grid, self.spec)
        return _navier_stokes(values, None, self.lin, self.grid, self.spec)

    def jvp(self, w: np.ndarray, d: np.ndarray) -> np.ndarray:
        values = unknowns_to_values(w, self.grid, self.spec)
        direction = unknowns_to_values(d, self.grid, self.spec)
        if self.spec.kind == POISSON:
            return _poisson(values, direction, self.grid, self.spec).tangent
        return _navier_stokes(values, direction, self.lin, self.grid, self.spec).tangent

    def pattern(self) -> sparse.csr_matrix:
        return residual_pattern(self.grid, self.spec)


def _radius(n, order):
    r = np.ones(n, dtype=int)
    if order == 4:
        r[1 : n - 1] = 2
    return r


def residual_pattern(grid: StructuredGrid, spec: ProblemSpec) -> sparse.csr_matrix:
    """
    Sparsity pattern of the residual Jacobian derived from the stencil footprint. Ghost
    neighbors under a zero-gradient rule fold onto the adjacent interior node; the
    diagonal is always present.
    """
    nx, ny, o = grid.nx, grid.ny, spec.scheme_order
    bc = boundary_spec(spec)
    neq = spec.n_eq
    slot = {c: spec.unknown_order.index(c) for c in spec.unknown_order}
    ci = {c: spec.components.index(c) for c in spec.components}
    I, J = np.meshgrid(np.arange(nx), np.arange(ny))
    rx, ry = _radius(nx, o)[I], _radius(ny, o)[J]

    # (equation index, unknown, x-neighbors, y-neighbors, center)
    if spec.kind == POISSON:
        terms = [(0, "u", True, True, True)]
    else:
        terms = [
            (0, "u", True, False, False),
            (0, "v", False, True, False),
            (1, "u", True, True, True),
            (1, "p", True, False, False),
            (2, "v", True, True, True),
            (2, "p", False, True, False),
        ]

    rows, cols = [], []
    n = grid.n_nodes * neq
    diag = np.arange(n)
    rows.append(diag)
    cols.append(diag)
    for e, c, along_x, along_y, center in terms:
        rules = bc.rules[ci[c]]
        row = (J * nx + I) * neq + e
        if center:
            rows.append(row.ravel())
            cols.append(((J * nx + I) * neq + slot[c]).ravel())
        for axis, on in (("x", along_x), ("y", along_y)):
            if not on:
                continue
            for d in (-2, -1, 1, 2):
                if axis == "x":
                    sel, t, m, lo, hi, other = rx >= abs(d), I + d, nx, "left", "right", J
                else:
                    sel, t, m, lo, hi, other = ry >= abs(d), J + d, ny, "bottom", "top", I
                low, high = t < 0, t >= m
                keep = sel.copy()
                keep &= ~low | isinstance(rules[lo], ZeroGradient)
                keep &= ~high | isinstance(rules[hi], ZeroGradient)
                t = np.clip(t, 0, m - 1)
                node = other * nx + t if axis == "x" else t * nx + other
                rows.append(row[keep])
                cols.append((node * neq + slot[c])[keep])
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    P = sparse.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
    P.sum_duplicates()
    P.data[:] = 1.0
    P.sort_indices()
    return P


def checkerboard_index(p: np.ndarray) -> float:
    """
    Share of the mean-free pressure in the (-1)^(i+j) mode; close to 1 for a pure
    checkerboard, small for smooth fields.
    """
    p = np.asarray(p, dtype=np.float64)
    q = p - p.mean()
    total = np.abs(q).sum()
    if total == 0:
        return 0.0
    J, I = np.indices(q.shape)
    sign = np.where((I + J) % 2 == 0, 1.0, -1.0)
    return float(abs((sign * q).sum()) / total)


def _neumann_1d(m: int, h: float) -> sparse.csr_matrix:
    main = np.full(m, 2.0)
    main[0] -= 1.0
    main[-1] -= 1.0
    off = np.full(m - 1, -1.0)
    return sparse.diags([off, main, off], [-1, 0, 1], shape=(m, m), format="csr") / (h * h)


def pressure_stabilization(jacobian, grid: StructuredGrid, spec: ProblemSpec, strength: float = 1.0):
    """
    Pressure block for the continuity rows of the cavity Jacobian: strength * tau * (L + pin),
    where L is the compact zero-gradient pressure Laplacian (positive semidefinite),
    tau = 1/J_uu is taken per node from the x-momentum diagonal and the pin acts on p at
    node (0, 0). Collocated central differences leave the constant pressure and the
    checkerboard modes (near) null in J; the block makes them visible to a factorization.
    Zero for Poisson or a zero strength.
    """
    n = spec.n_residual(grid)
    if strength < 0:
        raise DiscretizationException(f"The stabilization strength must be non-negative, found {strength}.")
    if spec.kind != CAVITY or strength == 0:
        return sparse.csr_matrix((n, n))
    if jacobian.shape != (n, n):
        raise DiscretizationException(f"A {jacobian.shape} Jacobian does not match {n} residual entries.")
    neq = spec.n_eq
    nodes = np.arange(grid.n_nodes)
    rows = nodes * neq + spec.equations.index("x_momentum")
    cols = nodes * neq + spec.unknown_order.index("u")
    a = np.abs(np.asarray(sparse.csr_matrix(jacobian)[rows, cols], dtype=np.float64).ravel())
    if not np.all(a > 0):
        raise DiscretizationException("The x-momentum diagonal of the Jacobian has zero entries.")
    tau = 1.0 / a

    Lx, Ly = _neumann_1d(grid.nx, grid.hx), _neumann_1d(grid.ny, grid.hy)
    L = sparse.kron(sparse.identity(grid.ny), Lx) + sparse.kron(Ly, sparse.identity(grid.nx))
    pin = np.zeros(grid.n_nodes)
    pin[0] = 1.0 / grid.hx**2 + 1.0 / grid.hy**2
    B = strength * (sparse.diags(tau) @ (L + sparse.diags(pin)))
    E = sparse.csr_matrix(
        ([1.0], ([spec.equations.index("continuity")], [spec.unknown_order.index("p")])),
        shape=(neq, neq),
    )
    return sparse.kron(B, E, format="csr")


def stabilized_jacobian(jacobian, grid: StructuredGrid, spec: ProblemSpec, strength: float = 1.0):
    """
    J plus the pressure stabilization; the matrix the preconditioner factors. The pattern
    is the union of both patterns and keeps the explicit zeros of J.
    """
    S = pressure_stabilization(jacobian, grid, spec, strength).tocoo()
    if S.nnz == 0:
        return jacobian
    J = sparse.coo_matrix(jacobian)
    A = sparse.csr_matrix(
        (
            np.concatenate([J.data, S.data]),
            (np.concatenate([J.row, S.row]), np.concatenate([J.col, S.col])),
        ),
        shape=J.shape,
    )
    A.sum_duplicates()
    A.sort_indices()
    return A
