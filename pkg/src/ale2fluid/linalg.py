"""Sparse storage and the linear solvers used by the stepping loop.

The default backend is a sparse LU factorization (deterministic at desk
scale).  A right-preconditioned restarted GMRES with an ILU(0) factor on
the assembled pattern is available as an alternative.  Saddle-point rows
have no stored diagonal, so the pattern is augmented with explicit zeros
on the diagonal before factorization; zero pivots met during elimination
are replaced by a small row-scaled value.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SolverError(RuntimeError):
    pass


class SingularMatrixError(SolverError):
    def __init__(self, row, msg=None):
        self.row = row
        super().__init__(msg or f"singular pivot near row {row}")


@dataclass(frozen=True)
class SparseMatrix:
    """Compressed-row storage; indices sorted and unique per row."""

    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    shape: tuple

    @classmethod
    def from_scipy(cls, a):
        a = a.tocsr()
        a.sum_duplicates()
        a.sort_indices()
        return cls(indptr=a.indptr, indices=a.indices, data=a.data, shape=a.shape)

    def to_scipy(self):
        return sp.csr_matrix((self.data, self.indices, self.indptr), shape=self.shape)

    @property
    def nnz(self):
        return len(self.data)


def _as_scipy(A):
    if isinstance(A, SparseMatrix):
        return A.to_scipy()
    return A.tocsr()


def _check_residual(A, x, b, rtol=1e-10):
    r = np.linalg.norm(A @ x - b)
    scale = np.sqrt((A.data ** 2).sum()) * np.linalg.norm(x) + np.linalg.norm(b)
    if r > rtol * max(scale, 1e-300):
        raise SolverError(f"direct solve residual {r:.3e} exceeds {rtol:.1e} * {scale:.3e}")
    return r


def solve_direct(A, b):
    """Sparse LU solve with a posteriori residual verification."""
    a = _as_scipy(A).tocsc()
    b = np.asarray(b, dtype=float)
    if a.shape[0] != a.shape[1] or a.shape[0] != b.shape[0]:
        raise ValueError("matrix/vector shapes are inconsistent")
    try:
        lu = spla.splu(a)
        x = lu.solve(b)
    except RuntimeError as exc:
        row = _guess_singular_row(a)
        raise SingularMatrixError(row, f"sparse LU failed ({exc}); suspect row {row}")
    if not np.all(np.isfinite(x)):
        row = int(np.nonzero(~np.isfinite(x))[0][0])
        raise SingularMatrixError(row)
    _check_residual(a.tocsr(), x, b)
    return x


def _guess_singular_row(a):
    csr = a.tocsr()
    norms = np.add.reduceat(np.abs(csr.data), csr.indptr[:-1]) if csr.nnz else np.zeros(csr.shape[0])
    counts = np.diff(csr.indptr)
    norms = np.where(counts > 0, norms, 0.0)
    return int(np.argmin(norms))


def ilu0(A):
    """ILU(0) factorization on the sparsity pattern of A (diagonal included).

    Returns (L, U) as CSR with unit lower-diagonal stored implicitly in L.
    """
    a = _as_scipy(A)
    n = a.shape[0]
    # force a structural diagonal (saddle rows store none); explicit zeros
    # survive the coo round-trip, unlike setdiag
    coo = a.tocoo()
    a = sp.csr_matrix(
        (np.concatenate([coo.data, np.zeros(n)]),
         (np.concatenate([coo.row, np.arange(n)]),
          np.concatenate([coo.col, np.arange(n)]))), shape=a.shape)
    a.sum_duplicates()
    a.sort_indices()
    indptr, indices, data = a.indptr, a.indices, a.data.astype(float)
    pos = [dict(zip(indices[indptr[i]:indptr[i + 1]],
                    range(indptr[i], indptr[i + 1]))) for i in range(n)]
    diag_pos = np.array([pos[i][i] for i in range(n)])
    row_scale = np.maximum.reduceat(np.abs(data), indptr[:-1])
    row_scale[np.diff(indptr) == 0] = 1.0
    for i in range(n):
        for idx in range(indptr[i], indptr[i + 1]):
            k = indices[idx]
            if k >= i:
                break
            piv = data[diag_pos[k]]
            if piv == 0.0:
                piv = 1e-12 * max(row_scale[k], 1.0)
                data[diag_pos[k]] = piv
            lik = data[idx] / piv
            data[idx] = lik
            row_k = pos[k]
            for jdx in range(indptr[i], indptr[i + 1]):
                j = indices[jdx]
                if j > k and j in row_k:
                    data[jdx] -= lik * data[row_k[j]]
        if data[diag_pos[i]] == 0.0:
            data[diag_pos[i]] = 1e-12 * max(row_scale[i], 1.0)
    lu = sp.csr_matrix((data, indices, indptr), shape=a.shape)
    L = sp.tril(lu, k=-1, format="csr") + sp.eye(n, format="csr")
    U = sp.triu(lu, k=0, format="csr")
    return L, U


def solve_gmres_ilu(A, b, x0=None, tol=1e-10, max_iter=2000, restart=50):
    """Restarted GMRES, right-preconditioned by ILU(0), warm-startable.

    Converges to a relative residual of tol or raises SolverError carrying
    the iteration count and the last residual.  An initial guess already
    within tolerance is accepted without iterating.  The system is
    symmetrically equilibrated first; saddle-point blocks otherwise spoil
    the conditioning badly.
    """
    a = _as_scipy(A)
    b = np.asarray(b, dtype=float)
    n = a.shape[0]
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    bnorm = np.linalg.norm(b)
    ref = bnorm if bnorm > 0 else 1.0
    if np.linalg.norm(b - a @ x0) <= tol * ref:
        return x0.copy(), 0

    rmax = np.maximum.reduceat(np.abs(a.data), a.indptr[:-1]) if a.nnz else np.ones(n)
    rmax = np.where(np.diff(a.indptr) > 0, rmax, 1.0)
    d = 1.0 / np.sqrt(np.maximum(rmax, 1e-300))
    D = sp.diags(d)
    a_s = (D @ a @ D).tocsr()
    b_s = d * b
    x0_s = x0 / d
    L, U = ilu0(a_s)

    def precond(v):
        y = spla.spsolve_triangular(L, v, lower=True, unit_diagonal=True)
        return spla.spsolve_triangular(U, y, lower=False)

    M = spla.LinearOperator((n, n), matvec=precond)
    iters = 0

    def count(_):
        nonlocal iters
        iters += 1

    x_s, info = spla.gmres(a_s, b_s, x0=x0_s, rtol=0.05 * tol, atol=0.0,
                           restart=restart,
                           maxiter=max(1, max_iter // max(restart, 1)), M=M,
                           callback=count, callback_type="pr_norm")
    x = d * x_s
    res = np.linalg.norm(b - a @ x) / ref
    if info != 0 or res > tol:
        raise SolverError(
            f"GMRES did not converge: {iters} iterations, relative residual {res:.3e}")
    return x, iters
