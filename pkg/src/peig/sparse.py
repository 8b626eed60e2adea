"""Sparse symmetric linear algebra: CSR storage, preconditioned conjugate
gradients, and the smallest generalized eigenpair used to seed the p = 2
problem.

Matrices are stored in standard CSR arrays (backed by scipy.sparse for
products and slicing); the CG and inverse power iterations are implemented
here because the solver contracts report diagnostics (iteration counts,
indefiniteness detection) that library black boxes do not expose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numba import njit


@dataclass
class CgReport:
    iterations: int
    final_relative_residual: float
    converged: bool


class CsrMatrix:
    """Compressed sparse row symmetric matrix.

    Thin wrapper over a scipy CSR matrix exposing the raw arrays.  After
    finalization the sparsity pattern is structurally symmetric and
    duplicate/zero entries have been merged away.
    """

    def __init__(self, mat: sp.csr_matrix):
        mat = mat.tocsr()
        mat.sum_duplicates()
        mat.eliminate_zeros()
        self._m = mat
        if __debug__:
            d = abs(mat - mat.T)
            scale = abs(mat).max() or 1.0
            assert d.nnz == 0 or d.max() <= 1e-12 * scale, "matrix is not symmetric"

    @classmethod
    def from_triplets(cls, rows, cols, values, n) -> "CsrMatrix":
        return cls(sp.coo_matrix((values, (rows, cols)), shape=(n, n)).tocsr())

    @property
    def n(self) -> int:
        return self._m.shape[0]

    @property
    def row_offsets(self) -> np.ndarray:
        return self._m.indptr

    @property
    def col_indices(self) -> np.ndarray:
        return self._m.indices

    @property
    def values(self) -> np.ndarray:
        return self._m.data

    @property
    def nnz(self) -> int:
        return self._m.nnz

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self._m @ x

    __matmul__ = matvec

    def diagonal(self) -> np.ndarray:
        return self._m.diagonal()

    def add_scaled(self, other: "CsrMatrix", scale: float) -> "CsrMatrix":
        """self + scale * other as a new matrix."""
        return CsrMatrix(self._m + scale * other._m)

    def to_scipy(self) -> sp.csr_matrix:
        return self._m


# ---------------------------------------------------------------------------
# preconditioners
# ---------------------------------------------------------------------------

@njit(cache=True)
def _ssor_sweep(indptr, indices, data, diag, omega, r, out, work):  # pragma: no cover
    n = r.shape[0]
    # forward: (D/omega + L) t = r
    for i in range(n):
        s = r[i]
        for k in range(indptr[i], indptr[i + 1]):
            j = indices[k]
            if j < i:
                s -= data[k] * work[j]
        work[i] = s * omega / diag[i]
    for i in range(n):
        work[i] *= diag[i]
    # backward: (D/omega + U) z = t
    for i in range(n - 1, -1, -1):
        s = work[i]
        for k in range(indptr[i], indptr[i + 1]):
            j = indices[k]
            if j > i:
                s -= data[k] * out[j]
        out[i] = s * omega / diag[i]
    c = (2.0 - omega) / omega
    for i in range(n):
        out[i] *= c


class JacobiPreconditioner:
    """z = D^{-1} r."""

    def __init__(self, diag: np.ndarray):
        self.inv_diag = 1.0 / diag

    def apply(self, r: np.ndarray) -> np.ndarray:
        return self.inv_diag * r


class SsorPreconditioner:
    """Symmetric SOR splitting  M = w/(2-w) (D/w + L) D^{-1} (D/w + L)^T."""

    def __init__(self, A: CsrMatrix, omega: float):
        if not (0.0 < omega < 2.0):
            raise ValueError(f"SSOR requires 0 < omega < 2, got {omega}")
        self.A = A
        self.omega = float(omega)
        self.diag = A.diagonal()
        self._out = np.empty(A.n)
        self._work = np.empty(A.n)

    def apply(self, r: np.ndarray) -> np.ndarray:
        _ssor_sweep(
            self.A.row_offsets, self.A.col_indices, self.A.values,
            self.diag, self.omega, r, self._out, self._work,
        )
        return self._out.copy()


def make_preconditioner(A: CsrMatrix, kind: str = "ssor", omega: float = 1.2):
    """Build a preconditioner; ``kind`` is 'jacobi' or 'ssor'."""
    diag = A.diagonal()
    bad = np.nonzero(diag <= 0.0)[0]
    if bad.size:
        raise ValueError(f"non-positive diagonal entry at row {int(bad[0])}")
    if kind == "jacobi":
        return JacobiPreconditioner(diag)
    if kind == "ssor":
        return SsorPreconditioner(A, omega)
    raise ValueError(f"unknown preconditioner kind '{kind}'")


# ---------------------------------------------------------------------------
# conjugate gradients
# ---------------------------------------------------------------------------

def default_max_iter(n: int) -> int:
    return int(10.0 * math.sqrt(n)) + 100


def cg_solve(
    A: CsrMatrix,
    b: np.ndarray,
    tol: float = 1e-6,
    max_iter: int | None = None,
    precond=None,
    x0: np.ndarray | None = None,
    check_monotone: bool = False,
):
    """Preconditioned CG for symmetric positive definite A.

    Stops when ||A x - b||_2 / ||b||_2 <= tol.  A zero right-hand side
    returns the zero vector immediately.  Raises on detected
    indefiniteness (a direction with p^T A p <= 0).

    Returns
    -------
    (x, report) : (ndarray, CgReport)
    """
    n = A.n
    if max_iter is None:
        max_iter = default_max_iter(n)
    nb = float(np.linalg.norm(b))
    if nb == 0.0:
        return np.zeros(n), CgReport(0, 0.0, True)
    if not np.all(np.isfinite(b)):
        raise ValueError("right-hand side contains non-finite entries")

    if x0 is None:
        x = np.zeros(n)
        r = b.copy()
    else:
        x = x0.astype(float).copy()
        r = b - A @ x
    z = precond.apply(r) if precond is not None else r.copy()
    p = z.copy()
    rz = float(r @ z)
    res = float(np.linalg.norm(r))
    for k in range(max_iter):
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            raise RuntimeError(
                f"matrix not positive definite: p^T A p = {pAp:.3e} at iteration {k + 1}"
            )
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        new_res = float(np.linalg.norm(r))
        if check_monotone:
            assert new_res <= res * (1.0 + 1e-12), "CG residual increased"
        res = new_res
        if res <= tol * nb:
            return x, CgReport(k + 1, res / nb, True)
        z = precond.apply(r) if precond is not None else r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, CgReport(max_iter, res / nb, False)


# ---------------------------------------------------------------------------
# smallest generalized eigenpair (p = 2 seed)
# ---------------------------------------------------------------------------

def smallest_generalized_eigenpair(
    K: CsrMatrix,
    M: CsrMatrix,
    tol: float = 1e-8,
    max_outer: int = 200,
    precond_kind: str = "ssor",
    omega: float = 1.2,
):
    """Inverse power iteration for the smallest eigenvalue of K u = lambda M u.

    K and M must be symmetric positive definite (Dirichlet-eliminated).
    Convergence is declared when the relative eigen-residual
    ||K u - lambda M u|| / ||K u|| drops below tol.  The returned vector is
    normalized to sup-norm 1 with nonnegative maximal entry.
    """
    n = K.n
    precond = make_preconditioner(K, precond_kind, omega)
    v = np.ones(n)
    v /= math.sqrt(float(v @ (M @ v)))
    lam = float(v @ (K @ v))
    prev = None
    for it in range(1, max_outer + 1):
        Kv = K @ v
        Mv = M @ v
        resid = float(np.linalg.norm(Kv - lam * Mv) / np.linalg.norm(Kv))
        if resid <= tol:
            break
        # solve K y = M v, warm-started from the previous direction
        inner_tol = max(min(1e-6, 0.01 * resid), 1e-14)
        y, rep = cg_solve(K, Mv, tol=inner_tol, precond=precond, x0=prev)
        if not rep.converged:
            raise RuntimeError(
                f"inner CG stalled in inverse power iteration {it} "
                f"(residual {rep.final_relative_residual:.3e})"
            )
        prev = y
        v = y / math.sqrt(float(y @ (M @ y)))
        lam = float(v @ (K @ v)) / float(v @ (M @ v))
    else:
        raise RuntimeError(
            f"inverse power iteration did not reach tol={tol} in {max_outer} iterations"
        )
    i = int(np.argmax(np.abs(v)))
    if v[i] < 0:
        v = -v
    v = v / np.abs(v).max()
    return lam, v
