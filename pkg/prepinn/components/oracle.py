# -*- coding: utf-8 -*-

from __future__ import absolute_import, annotations, unicode_literals

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.sparse.linalg import spsolve

from prepinn.utils import PrepinnException

from . import discretize
from .discretize import (
    LinearizationState,
    ResidualOperator,
    cavity_problem,
    residual_pattern,
    unknowns_to_field,
)
from .grid import Field, StructuredGrid
from .sparsela import assemble_jacobian, color_columns, gmres, ilu0

log = logging.getLogger("oracle")

ANALYTIC = "analytic"
PICARD = "picard"

# inner linear solves of the Picard iteration
GMRES_TOL = 1e-10
GMRES_RESTART = 100
GMRES_MAX_ITER = 1000


class OracleException(PrepinnException):
    def __init__(self, message, history=()):
        self.history = tuple(history)
        super().__init__(message)


@dataclass(frozen=True)
class PicardStep:
    iteration: int
    change: float
    residual: float
    krylov_iterations: int
    gauge_defect: float = 0.0


@dataclass(frozen=True, eq=False)
class ReferenceSolution:
    field: Field
    provenance: str
    converged: bool = True
    history: Tuple[PicardStep, ...] = ()

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    @property
    def grid(self) -> StructuredGrid:
        return self.field.grid


def poisson_exact(grid: StructuredGrid, k: int) -> ReferenceSolution:
    """
    sin(k pi x) sin(pi y) sampled at the interior nodes.
    """
    X, Y = np.meshgrid(grid.x_nodes(), grid.y_nodes())
    return ReferenceSolution(Field(grid, discretize.poisson_exact(X, Y, k), ("u",)), ANALYTIC)


def _gauge_fixed(J, b):
    """
    Replace the first row (continuity at node (0, 0)) with p_00 = 0.
    """
    A = J.copy()
    A.data[A.indptr[0] : A.indptr[1]] = 0.0
    A[0, 0] = 1.0
    b = b.copy()
    b[0] = 0.0
    return A, b


def picard_solve(
    grid: StructuredGrid,
    re: float,
    tol: float = 1e-8,
    max_outer: int = 500,
    relax: float = 0.7,
    scheme_order: int = 2,
    lid_velocity: float = 1.0,
    strict: bool = True,
    exit_event=None,
) -> ReferenceSolution:
    """
    Steady cavity flow on the training discretization by Picard iteration: freeze the
    convective velocities, solve the linearized system with ILU(0)-preconditioned GMRES
    and under-relax the velocity update. Stops when the largest update is below `tol`
    and the residual evaluated at its own velocities is at most 10*tol on every row
    except the gauge row.
    """
    if tol <= 0:
        raise OracleException(f"The tolerance must be positive, found {tol}.")
    if not 0 < relax <= 1:
        raise OracleException(f"The relaxation factor must lie in (0, 1], found {relax}.")
    spec = cavity_problem(re, scheme_order, lid_velocity)
    pattern = residual_pattern(grid, spec)
    coloring = color_columns(pattern)
    n = spec.n_residual(grid)
    velocity = np.array([c != "p" for c in spec.unknown_order] * grid.n_nodes)

    def linearized(w):
        return ResidualOperator(grid, spec, LinearizationState.from_field(unknowns_to_field(w, grid, spec)))

    w = np.zeros(n)
    history = []
    for it in range(max_outer):
        if exit_event is not None and exit_event.is_set():
            raise OracleException(f"Interrupted at outer iteration {it}.", history)
        J, b = assemble_jacobian(linearized(w), w, coloring, pattern)
        A, b = _gauge_fixed(J, b)
        sol = gmres(A, b, ilu0(A), tol=GMRES_TOL, restart=GMRES_RESTART, max_iter=GMRES_MAX_ITER, x0=w)
        x = sol.x
        if not sol.converged:
            log.warning(
                f"GMRES stalled at relative residual {sol.residual:.3e} in outer iteration {it}, "
                f"using a sparse direct solve."
            )
            x = spsolve(A.tocsc(), b)

        w_next = np.where(velocity, w + relax * (x - w), x)
        change = float(np.abs(w_next - w).max())
        w = w_next
        r = linearized(w)(w)
        # row 0 is the gauge row, its continuity defect is reported apart
        res = float(np.abs(r[1:]).max())
        history.append(PicardStep(it, change, res, sol.iterations, float(abs(r[0]))))
        log.info(
            f"picard it={it} change={change:.3e} residual={res:.3e} krylov={sol.iterations} "
            f"gauge_defect={abs(r[0]):.3e}"
        )
        if change < tol and res <= 10 * tol:
            return ReferenceSolution(unknowns_to_field(w, grid, spec), PICARD, True, tuple(history))

    message = (
        f"The Picard iteration did not converge in {max_outer} outer iterations "
        f"(last change {history[-1].change:.3e}, residual {history[-1].residual:.3e})."
        if history
        else "The Picard iteration was not run."
    )
    if strict:
        raise OracleException(message, history)
    log.warning(message)
    return ReferenceSolution(unknowns_to_field(w, grid, spec), PICARD, False, tuple(history))


def gauge_aligned(x) -> np.ndarray:
    """
    Values of a Field or ReferenceSolution with the pressure mean removed; arrays pass through.
    """
    if isinstance(x, (Field, ReferenceSolution)):
        values = np.array(x.values, dtype=np.float64)
        names = x.field.names if isinstance(x, ReferenceSolution) else x.names
        if "p" in names:
            # the pressure is known up to a constant
            p = names.index("p")
            values[p] -= values[p].mean()
        return values
    return np.asarray(x, dtype=np.float64)


def relative_l2(u, ref) -> float:
    """
    ||u - ref|| / ||ref|| over all components jointly; a pressure component is compared
    with its mean removed from both fields.
    """
    a, b = gauge_aligned(u), gauge_aligned(ref)
    if a.shape != b.shape:
        raise OracleException(f"Cannot compare fields of shapes {a.shape} and {b.shape}.")
    den = np.linalg.norm(b)
    if den == 0:
        raise OracleException("The reference has zero norm.")
    return float(np.linalg.norm(a - b) / den)
