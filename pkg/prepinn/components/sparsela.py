# -*- coding: utf-8 -*-

from __future__ import absolute_import, annotations, unicode_literals

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sparse
from scipy.sparse.linalg import spsolve_triangular

from prepinn.utils import PrepinnException, format_float

log = logging.getLogger("sparsela")

# pivots smaller than this fraction of max|J_ii| are shifted
PIVOT_SHIFT = 1e-8

# dense computations are refused above this size
DENSE_LIMIT = 5000


class SparseLAException(PrepinnException):
    pass


class IluBreakdownException(SparseLAException):
    def __init__(self, row, message=None):
        self.row = row
        super().__init__(message or f"ILU(0) breakdown at row {row}: the pivot is zero after shifting.")


def check_csr(A) -> sparse.csr_matrix:
    """
    Return `A` as a canonical CSR matrix (sorted, duplicate-free column indices).
    """
    if not sparse.issparse(A):
        raise SparseLAException(f"Expected a sparse matrix, found {type(A).__name__}.")
    A = sparse.csr_matrix(A, dtype=np.float64)
    if not A.has_canonical_format:
        A = A.copy()
        A.sum_duplicates()
        A.sort_indices()
    return A


def spmv(A, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != A.shape[1]:
        raise SparseLAException(f"Cannot multiply a {A.shape} matrix by a vector of shape {x.shape}.")
    return np.asarray(A @ x)


def identity_matrix(n: int) -> sparse.csr_matrix:
    return sparse.identity(n, dtype=np.float64, format="csr")


@dataclass(frozen=True, eq=False)
class Coloring:
    """
    Column coloring; columns sharing a color have no nonzero row in common.
    """

    color_of: np.ndarray
    n_colors: int

    def groups(self):
        return [np.flatnonzero(self.color_of == c) for c in range(self.n_colors)]

    def is_valid(self, pattern) -> bool:
        """
        Exhaustive scan: within every row all column colors must be distinct.
        """
        P = check_csr(pattern).tocoo()
        if self.color_of.shape[0] != P.shape[1]:
            return False
        keys = P.row.astype(np.int64) * max(self.n_colors, 1) + self.color_of[P.col]
        return np.unique(keys).size == keys.size


def column_conflicts(pattern) -> sparse.csr_matrix:
    """
    Column intersection graph: (a, b) is set when columns a and b share a nonzero row.
    """
    P = check_csr(pattern)
    B = sparse.csr_matrix((np.ones(P.nnz, dtype=np.int32), P.indices, P.indptr), shape=P.shape)
    C = (B.T @ B).tocsr()
    C.sort_indices()
    return C


def color_columns(pattern) -> Coloring:
    """
    Greedy sequential coloring in natural column order: every column takes the smallest
    color not used by any conflicting column colored before it.
    """
    C = column_conflicts(pattern)
    n = C.shape[0]
    colors = np.full(n, -1, dtype=np.int64)
    for c in range(n):
        used = colors[C.indices[C.indptr[c] : C.indptr[c + 1]]]
        used = used[used >= 0]
        taken = np.zeros(used.size + 1, dtype=bool)
        taken[used[used <= used.size]] = True
        colors[c] = int(np.argmin(taken))
    n_colors = int(colors.max()) + 1 if n > 0 else 0
    log.debug(f"Colored {n} columns with {n_colors} colors.")
    return Coloring(colors, n_colors)


def assemble_jacobian(op, point, coloring: Coloring, pattern=None) -> Tuple[sparse.csr_matrix, np.ndarray]:
    """
    Assemble the Jacobian of the affine residual operator `op` with one directional
    derivative per color and recover the right-hand side b = J*point - op(point).
    `op` provides `__call__(w)`, `jvp(w, d)` and `pattern()`.
    """
    P = check_csr(op.pattern() if pattern is None else pattern)
    n_rows, n_cols = P.shape
    point = np.asarray(point, dtype=np.float64)
    if point.shape != (n_cols,):
        raise SparseLAException(f"The point has shape {point.shape}, expected ({n_cols},).")
    rows = np.repeat(np.arange(n_rows), np.diff(P.indptr))
    cols = P.indices
    entry_color = coloring.color_of[cols]
    values = np.zeros(P.nnz)
    for g, group in enumerate(coloring.groups()):
        seed = np.zeros(n_cols)
        seed[group] = 1.0
        y = op.jvp(point, seed)
        mask = entry_color == g
        values[mask] = y[rows[mask]]
        covered = np.zeros(n_rows, dtype=bool)
        covered[rows[mask]] = True
        stray = np.flatnonzero(~covered & (y != 0))
        if stray.size > 0:
            raise SparseLAException(
                f"Pattern mismatch: row {stray[0]} has a nonzero derivative for color {g} outside the declared pattern."
            )
    J = sparse.csr_matrix((values, P.indices.copy(), P.indptr.copy()), shape=P.shape)
    b = J @ point - op(point)
    log.debug(f"Assembled a {n_rows}x{n_cols} Jacobian, nnz={J.nnz}, {coloring.n_colors} directional derivatives.")
    return J, b


def probe_jacobian(op, point) -> np.ndarray:
    """
    Dense Jacobian with one directional derivative per column.
    """
    n = np.asarray(point).shape[0]
    if n > DENSE_LIMIT:
        raise SparseLAException(f"Refusing to probe a dense {n}x{n} Jacobian.")
    J = np.zeros((op(point).shape[0], n))
    e = np.zeros(n)
    for c in range(n):
        e[c] = 1.0
        J[:, c] = op.jvp(point, e)
        e[c] = 0.0
    return J


@dataclass(frozen=True, eq=False)
class IluFactors:
    """
    ILU(0) factors: `lower` holds the strictly lower part of the unit lower factor,
    `upper` the diagonal and strictly upper part. Together they cover the pattern of J.
    """

    lower: sparse.csr_matrix
    upper: sparse.csr_matrix
    shifted_rows: Tuple[int, ...] = ()
    _solvers: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        n = self.upper.shape[0]
        if self.lower.shape != (n, n) or self.upper.shape != (n, n):
            raise SparseLAException("The ILU factors must be square and of equal size.")
        d = self.upper.diagonal()
        if np.any(d == 0) or not np.isfinite(d).all():
            raise IluBreakdownException(int(np.flatnonzero((d == 0) | ~np.isfinite(d))[0]))
        unit_lower = (self.lower + identity_matrix(n)).tocsr()
        unit_lower.sort_indices()
        upper = self.upper.tocsr()
        upper.sort_indices()
        unit_lower_t = unit_lower.T.tocsr()
        unit_lower_t.sort_indices()
        upper_t = upper.T.tocsr()
        upper_t.sort_indices()
        self._solvers.update(
            unit_lower=unit_lower, upper=upper, unit_lower_t=unit_lower_t, upper_t=upper_t
        )

    @property
    def n(self) -> int:
        return self.upper.shape[0]

    def product(self) -> sparse.csr_matrix:
        """
        M = L*U with the unit diagonal of L restored.
        """
        return (self._solvers["unit_lower"] @ self._solvers["upper"]).tocsr()

    @classmethod
    def identity(cls, n: int) -> "IluFactors":
        return cls(sparse.csr_matrix((n, n)), identity_matrix(n))


def ilu0(J, shift_tol: float = PIVOT_SHIFT) -> IluFactors:
    """
    Incomplete LU factorization with zero fill-in (IKJ variant). Updates are restricted
    to the pattern of J; pivots below shift_tol*max|J_ii| are replaced by
    sign(pivot)*shift_tol*max|J_ii|.
    """
    A = check_csr(J)
    n, m = A.shape
    if n != m:
        raise SparseLAException(f"ILU(0) needs a square matrix, found {A.shape}.")
    indptr, indices = A.indptr, A.indices
    data = A.data.copy()

    diag_pos = np.empty(n, dtype=np.int64)
    for i in range(n):
        s, e = indptr[i], indptr[i + 1]
        p = s + np.searchsorted(indices[s:e], i)
        if p >= e or indices[p] != i:
            raise IluBreakdownException(i, f"Row {i} has no diagonal entry in its pattern.")
        diag_pos[i] = p

    scale = np.abs(data[diag_pos]).max() if n > 0 else 0.0
    if scale == 0:
        scale = np.abs(data).max() if data.size > 0 else 1.0
    tau = shift_tol * scale

    shifted = []
    for i in range(n):
        s, e = indptr[i], indptr[i + 1]
        cols_i = indices[s:e]
        vals = data[s:e]
        for p in range(diag_pos[i] - s):
            k = cols_i[p]
            vals[p] /= data[diag_pos[k]]
            ks, ke = diag_pos[k] + 1, indptr[k + 1]
            if ke <= ks:
                continue
            cols_k = indices[ks:ke]
            idx = np.searchsorted(cols_i, cols_k)
            ok = idx < cols_i.size
            idx, hit_cols = idx[ok], cols_k[ok]
            hit = cols_i[idx] == hit_cols
            vals[idx[hit]] -= vals[p] * data[ks:ke][ok][hit]
        d = diag_pos[i] - s
        pivot = vals[d]
        if not np.isfinite(pivot):
            raise IluBreakdownException(i, f"ILU(0) breakdown at row {i}: non-finite pivot.")
        if abs(pivot) < tau:
            vals[d] = tau if pivot >= 0 else -tau
            shifted.append(i)
        if vals[d] == 0:
            raise IluBreakdownException(i)

    if shifted:
        log.warning(
            f"ILU(0) shifted {len(shifted)} pivot(s) to magnitude {tau:.3e}; first rows: {shifted[:10]}"
        )

    rows = np.repeat(np.arange(n), np.diff(indptr))
    lo = indices < rows
    lower = sparse.csr_matrix((data[lo], (rows[lo], indices[lo])), shape=(n, n))
    upper = sparse.csr_matrix((data[~lo], (rows[~lo], indices[~lo])), shape=(n, n))
    return IluFactors(lower, upper, tuple(shifted))


def _check_vector(fac, f):
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (fac.n,):
        raise SparseLAException(f"Vector of shape {f.shape} does not match factors of size {fac.n}.")
    return f


def apply_minv(fac: IluFactors, f) -> np.ndarray:
    """
    p = M^-1 f by forward substitution L q = f followed by backward substitution U p = q.
    """
    f = _check_vector(fac, f)
    s = fac._solvers
    q = spsolve_triangular(s["unit_lower"], f, lower=True)
    return spsolve_triangular(s["upper"], q, lower=False)


def apply_minv_transpose(fac: IluFactors, r) -> np.ndarray:
    """
    (M^-1)^T r = L^-T (U^-T r) by transposed triangular substitutions.
    """
    r = _check_vector(fac, r)
    s = fac._solvers
    y = spsolve_triangular(s["upper_t"], r, lower=True)
    return spsolve_triangular(s["unit_lower_t"], y, lower=False)


def dense_minv(fac: IluFactors) -> np.ndarray:
    """
    Explicit M^-1 for small problems.
    """
    if fac.n > DENSE_LIMIT:
        raise SparseLAException(f"Refusing to form a dense {fac.n}x{fac.n} inverse.")
    s = fac._solvers
    q = scipy.linalg.solve_triangular(
        s["unit_lower"].toarray(), np.eye(fac.n), lower=True, unit_diagonal=True
    )
    return scipy.linalg.solve_triangular(s["upper"].toarray(), q, lower=False)


def preconditioned_dense(J, fac: IluFactors) -> np.ndarray:
    """
    M^-1 J formed densely.
    """
    if fac.n > DENSE_LIMIT:
        raise SparseLAException(f"Refusing to densify a {fac.n}x{fac.n} operator.")
    s = fac._solvers
    q = scipy.linalg.solve_triangular(
        s["unit_lower"].toarray(), J.toarray(), lower=True, unit_diagonal=True
    )
    return scipy.linalg.solve_triangular(s["upper"].toarray(), q, lower=False)


def estimate_condition(A) -> float:
    """
    2-norm condition number from the singular values of the densified matrix.
    """
    if max(A.shape) > DENSE_LIMIT:
        raise SparseLAException(f"Refusing the dense condition number of a {A.shape} matrix.")
    D = A.toarray() if sparse.issparse(A) else np.asarray(A, dtype=np.float64)
    s = np.linalg.svd(D, compute_uv=False)
    if s[-1] == 0:
        return float("inf")
    return float(s[0] / s[-1])


@dataclass
class GmresResult:
    x: np.ndarray
    converged: bool
    iterations: int
    residual: float


def gmres(
    A,
    b,
    fac: Optional[IluFactors] = None,
    tol: float = 1e-8,
    restart: int = 50,
    max_iter: int = 2000,
    x0=None,
) -> GmresResult:
    """
    Right-preconditioned restarted GMRES (modified Gram-Schmidt, Givens rotations).
    Solves A M^-1 y = b and returns x = M^-1 y; `residual` is the true relative residual
    ||b - A x|| / ||b||. Non-convergence is reported, not raised.
    """
    if tol <= 0:
        raise SparseLAException(f"The GMRES tolerance must be positive, found {tol}.")
    A = check_csr(A)
    n = A.shape[0]
    if A.shape != (n, n):
        raise SparseLAException(f"GMRES needs a square matrix, found {A.shape}.")
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (n,):
        raise SparseLAException(f"The right-hand side has shape {b.shape}, expected ({n},).")

    precond = (lambda v: v) if fac is None else (lambda v: apply_minv(fac, v))
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return GmresResult(np.zeros(n), True, 0, 0.0)

    iterations = 0
    r = b - A @ x
    beta = np.linalg.norm(r)
    while beta / bnorm > tol and iterations < max_iter:
        m = min(restart, max_iter - iterations)
        V = np.zeros((n, m + 1))
        H = np.zeros((m + 1, m))
        cs, sn = np.zeros(m), np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[:, 0] = r / beta
        steps = 0
        for j in range(m):
            w = A @ precond(V[:, j])
            for i in range(j + 1):
                H[i, j] = np.dot(V[:, i], w)
                w -= H[i, j] * V[:, i]
            H[j + 1, j] = np.linalg.norm(w)
            breakdown = H[j + 1, j] <= 1e-14 * beta
            if not breakdown:
                V[:, j + 1] = w / H[j + 1, j]

            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            rho = np.hypot(H[j, j], H[j + 1, j])
            cs[j], sn[j] = H[j, j] / rho, H[j + 1, j] / rho
            H[j, j] = rho
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]

            steps = j + 1
            iterations += 1
            if breakdown or abs(g[j + 1]) / bnorm <= tol:
                break

        y = scipy.linalg.solve_triangular(H[:steps, :steps], g[:steps], lower=False)
        x = x + precond(V[:, :steps] @ y)
        r = b - A @ x
        beta = np.linalg.norm(r)
        if breakdown:
            break

    res = beta / bnorm
    converged = res <= tol
    if not converged:
        log.warning(f"GMRES did not converge in {iterations} iterations, relative residual {res:.3e}.")
    else:
        log.debug(f"GMRES converged in {iterations} iterations, relative residual {res:.3e}.")
    return GmresResult(x, converged, iterations, float(res))


def matrix_market_text(A) -> str:
    """
    `A` in Matrix Market coordinate format with 1-based indices.
    """
    C = check_csr(A).tocoo()
    lines = [
        "%%MatrixMarket matrix coordinate real general",
        f"{C.shape[0]} {C.shape[1]} {C.nnz}",
    ]
    lines += [f"{i + 1} {j + 1} {format_float(v)}" for i, j, v in zip(C.row, C.col, C.data)]
    return "\n".join(lines) + "\n"
