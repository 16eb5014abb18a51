# -*- coding: utf-8 -*-

from __future__ import absolute_import, annotations, unicode_literals

import logging
from dataclasses import dataclass
from typing import List

import numpy as np
import scipy.sparse as sparse

from prepinn.utils import perf_counter

from .discretize import (
    LinearizationState,
    ResidualOperator,
    cavity_problem,
    field_to_unknowns,
    poisson_problem,
    unknowns_to_values,
)
from .grid import coordinate_channels, make_grid
from .net import NetworkArch, backward, forward, init_params
from .sparsela import (
    IluFactors,
    apply_minv,
    apply_minv_transpose,
    assemble_jacobian,
    color_columns,
    dense_minv,
    estimate_condition,
    gmres,
    ilu0,
    preconditioned_dense,
    probe_jacobian,
)
from .train import baseline_loss, dense_precond_loss, precond_loss

log = logging.getLogger("check")

POISSON_EXTENTS = (-1.0, 1.0, -1.0, 1.0)
CAVITY_EXTENTS = (0.0, 1.0, 0.0, 1.0)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def poisson_system(n, k=1):
    grid = make_grid(n, n, POISSON_EXTENTS)
    spec = poisson_problem(k)
    op = ResidualOperator(grid, spec)
    point = np.zeros(op.n)
    return op, point


def cavity_system(n, re=100.0, seed=0):
    grid = make_grid(n, n, CAVITY_EXTENTS)
    spec = cavity_problem(re)
    rng = np.random.default_rng(seed)
    lin = LinearizationState(rng.uniform(-1, 1, grid.shape), rng.uniform(-1, 1, grid.shape))
    op = ResidualOperator(grid, spec, lin)
    point = rng.standard_normal(op.n)
    return op, point


def assembled(op, point):
    pattern = op.pattern()
    coloring = color_columns(pattern)
    J, b = assemble_jacobian(op, point, coloring, pattern)
    return J, b, coloring


def corrupted(fac: IluFactors, seed=0) -> IluFactors:
    """
    Factors with perturbed upper-triangular values.
    """
    rng = np.random.default_rng(seed)
    upper = fac.upper.copy()
    upper.data = upper.data * (1.0 + 1e-3 * rng.uniform(0.5, 1.0, upper.data.size))
    return IluFactors(fac.lower.copy(), upper, fac.shifted_rows)


def pattern_error(J, fac: IluFactors) -> float:
    """
    Largest |(LU)_ij - J_ij| over the pattern of J, relative to max|J|. Diagonals of
    rows with a shifted pivot are skipped.
    """
    J = sparse.csr_matrix(J)
    LU = fac.product()
    rows = np.repeat(np.arange(J.shape[0]), np.diff(J.indptr))
    diff = np.asarray(LU[rows, J.indices]).ravel() - J.data
    shifted = (rows == J.indices) & np.isin(rows, fac.shifted_rows)
    diff[shifted] = 0.0
    return float(np.abs(diff).max() / np.abs(J.data).max())


def check_ilu_pattern(corrupt_ilu=False):
    worst = 0.0
    for name, (op, point) in (("poisson", poisson_system(8)), ("cavity", cavity_system(8))):
        J, _, _ = assembled(op, point)
        fac = ilu0(J)
        if corrupt_ilu:
            fac = corrupted(fac)
        worst = max(worst, pattern_error(J, fac))
    return worst <= 1e-12, f"max relative pattern error {worst:.3e}"


def check_coloring():
    details = []
    ok = True
    for name, (op, point) in (("poisson", poisson_system(8)), ("cavity", cavity_system(8))):
        J, _, coloring = assembled(op, point)
        valid = coloring.is_valid(op.pattern())
        exact = np.array_equal(J.toarray(), probe_jacobian(op, point))
        ok = ok and valid and exact
        details.append(f"{name}: {coloring.n_colors} colors")
    return ok, ", ".join(details)


def check_adjoint_identity(pairs=100, seed=0):
    op, point = poisson_system(10)
    J, _, _ = assembled(op, point)
    fac = ilu0(J)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(pairs):
        r, f = rng.standard_normal(op.n), rng.standard_normal(op.n)
        a = float(apply_minv_transpose(fac, r) @ f)
        b = float(r @ apply_minv(fac, f))
        worst = max(worst, abs(a - b) / max(abs(a), abs(b), 1e-300))
    return worst <= 1e-12, f"max relative mismatch {worst:.3e} over {pairs} pairs"


def small_network_problem(seed=0, weight=1.0):
    """
    6x6 Poisson grid with a 2-8-1 tanh network.
    """
    op, _ = poisson_system(6)
    arch = NetworkArch(kind="mlp", widths=(8,), activation="tanh", n_out=1)
    params = init_params(arch, seed)
    coords = coordinate_channels(op.grid)
    J, _, _ = assembled(op, np.zeros(op.n))
    return op, J, arch, params, coords


def residual_of(op, params, coords):
    field, tape = forward(params, coords, op.spec.components)
    return op(field_to_unknowns(field, op.spec)), tape


def chained_gradient(op, J, params, coords, loss_fn):
    """
    Loss and parameter gradient with the residual-side seed chained through J^T.
    """
    f, tape = residual_of(op, params, coords)
    loss, seed_r = loss_fn(f)
    seed = unknowns_to_values(J.T @ seed_r, op.grid, op.spec)
    return loss, backward(tape, seed, params)


def check_precond_loss(weight=1.0):
    op, J, arch, params, coords = small_network_problem()
    fac = ilu0(J)
    minv = dense_minv(fac)
    loss, grad = chained_gradient(op, J, params, coords, lambda f: precond_loss(f, fac, weight)[:2])
    dense, _ = dense_precond_loss(residual_of(op, params, coords)[0], minv, weight)
    loss_err = abs(loss - dense) / abs(dense)

    def explicit(theta):
        f, _ = residual_of(op, params.with_values(theta), coords)
        return dense_precond_loss(f, minv, weight)[0]

    theta = params.values
    worst = 0.0
    for i in range(theta.size):
        h = 1e-6 * (1 + abs(theta[i]))
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        fd = (explicit(tp) - explicit(tm)) / (2 * h)
        if abs(fd) > 1e-8:
            worst = max(worst, abs(grad[i] - fd) / abs(fd))
    ok = loss_err <= 1e-12 and worst <= 1e-5
    return ok, f"loss mismatch {loss_err:.3e}, gradient mismatch {worst:.3e}"


def check_identity_degeneracy(seed=0):
    op, point = poisson_system(8)
    rng = np.random.default_rng(seed)
    f = rng.standard_normal(op.n)
    lb, sb = baseline_loss(f, 3.0)
    lp, sp, _ = precond_loss(f, IluFactors.identity(op.n), 3.0)
    ok = lb == lp and np.array_equal(sb, sp)
    return ok, f"baseline {lb:.17g}, preconditioned {lp:.17g}"


def check_condition():
    op, point = poisson_system(16)
    J, _, _ = assembled(op, point)
    fac = ilu0(J)
    k_j = estimate_condition(J)
    k_m = estimate_condition(preconditioned_dense(J, fac))
    return k_m < k_j / 2, f"kappa(J)={k_j:.4e}, kappa(M^-1 J)={k_m:.4e}, ratio={k_j / k_m:.2f}"


def check_gmres():
    op, point = poisson_system(32)
    J, b, _ = assembled(op, point)
    sol = gmres(J, b, ilu0(J), tol=1e-8, restart=50, max_iter=50)
    exact = np.linalg.solve(J.toarray(), b)
    err = float(np.abs(sol.x - exact).max() / np.abs(exact).max())
    ok = sol.converged and sol.iterations <= 50 and err <= 1e-6
    return ok, f"{sol.iterations} iterations, relative residual {sol.residual:.3e}, error {err:.3e}"


def check_net_gradient(seed=1):
    worst = 0.0
    grid = make_grid(8, 8, CAVITY_EXTENTS)
    coords = coordinate_channels(grid)
    for arch in (
        NetworkArch(kind="mlp", widths=(6, 5), activation="tanh", n_out=3),
        NetworkArch(kind="mlp", widths=(6,), activation="gelu", n_out=1),
        NetworkArch(kind="conv", widths=(3, 4), activation="tanh", n_out=1),
        NetworkArch(kind="conv", widths=(3, 4), activation="gelu", n_out=3),
    ):
        params = init_params(arch, seed)
        out, tape = forward(params, coords)
        grad = backward(tape, 2.0 * out.values, params)
        rng = np.random.default_rng(seed)
        for i in rng.choice(params.values.size, size=min(12, params.values.size), replace=False):
            theta = params.values
            h = 1e-6 * (1 + abs(theta[i]))
            tp, tm = theta.copy(), theta.copy()
            tp[i] += h
            tm[i] -= h
            fp = float((forward(params.with_values(tp), coords)[0].values ** 2).sum())
            fm = float((forward(params.with_values(tm), coords)[0].values ** 2).sum())
            fd = (fp - fm) / (2 * h)
            if abs(fd) > 1e-8:
                worst = max(worst, abs(grad[i] - fd) / abs(fd))
    return worst < 1e-6, f"max relative gradient error {worst:.3e}"


def check_suite(corrupt_ilu=False) -> List[tuple]:
    return [
        ("ilu-pattern-exact", lambda: check_ilu_pattern(corrupt_ilu)),
        ("coloring-assembly", check_coloring),
        ("adjoint-identity", check_adjoint_identity),
        ("precond-loss-gradient", check_precond_loss),
        ("identity-degeneracy", check_identity_degeneracy),
        ("condition-reduction", check_condition),
        ("gmres-oracle", check_gmres),
        ("network-gradient", check_net_gradient),
    ]


def run_checks(corrupt_ilu=False) -> List[CheckResult]:
    results = []
    for name, fn in check_suite(corrupt_ilu):
        start = perf_counter()
        try:
            passed, detail = fn()
        except Exception as e:
            passed, detail = False, f"{type(e).__name__}: {e}"
        result = CheckResult(name, bool(passed), detail, perf_counter(start))
        (log.info if result.passed else log.error)(
            f"{name}: {'PASS' if result.passed else 'FAIL'} ({detail})"
        )
        results.append(result)
    return results
