"""Sparse matrix helpers and direct solves.

Matrices are ``scipy.sparse.csr_matrix`` with sorted column indices; the
finite element pattern is kept structurally symmetric (explicit zeros are
never dropped) so that entry ``(i, j)`` always has a partner ``(j, i)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SingularMatrixError(np.linalg.LinAlgError):
    def __init__(self, row=None):
        self.row = row
        where = f"zero pivot in row {row}" if row is not None else "zero pivot"
        super().__init__(f"matrix is singular: {where}")


def csr(matrix) -> sp.csr_matrix:
    out = sp.csr_matrix(matrix)
    out.sort_indices()
    return out


@dataclass(frozen=True)
class Pattern:
    """Coordinates of the stored entries of a CSR matrix.

    ``transpose[k]`` is the position of entry ``(j, i)`` for entry
    ``k = (i, j)``.
    """

    n: int
    indptr: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    transpose: np.ndarray

    @property
    def offdiag(self) -> np.ndarray:
        return self.rows != self.cols

    def lookup(self, i, j) -> np.ndarray:
        """Positions of entries ``(i, j)``; raises ``KeyError`` for missing ones."""
        keys = np.asarray(i, dtype=np.int64) * self.n + np.asarray(j, dtype=np.int64)
        all_keys = self.rows * self.n + self.cols
        pos = np.minimum(np.searchsorted(all_keys, keys), len(all_keys) - 1)
        if not np.all(all_keys[pos] == keys):
            raise KeyError("entry not in sparsity pattern")
        return pos

    def matrix(self, values) -> sp.csr_matrix:
        return sp.csr_matrix((np.asarray(values, dtype=float), self.cols.copy(), self.indptr.copy()),
                             shape=(self.n, self.n))


def pattern_of(matrix: sp.csr_matrix) -> Pattern:
    if not matrix.has_sorted_indices:
        raise ValueError("CSR matrix must have sorted indices")
    n = matrix.shape[0]
    rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(matrix.indptr))
    cols = matrix.indices.astype(np.int64)
    keys = rows * n + cols
    tkeys = cols * n + rows
    pos = np.minimum(np.searchsorted(keys, tkeys), len(keys) - 1)
    if not np.all(keys[pos] == tkeys):
        raise ValueError("sparsity pattern is not structurally symmetric")
    return Pattern(n, matrix.indptr.astype(np.int64), rows, cols, pos)


def same_pattern(a: sp.csr_matrix, b: sp.csr_matrix) -> bool:
    return (a.shape == b.shape and np.array_equal(a.indptr, b.indptr)
            and np.array_equal(a.indices, b.indices))


class Factorization:
    """Sparse LU factorisation (SuperLU, partial pivoting) for repeated solves."""

    def __init__(self, matrix: sp.csr_matrix):
        self.matrix = csr(matrix)
        if self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError("matrix must be square")
        try:
            self._lu = spla.splu(self.matrix.tocsc(), permc_spec="COLAMD")
        except RuntimeError:
            raise SingularMatrixError(first_zero_pivot(self.matrix)) from None

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        x = self._lu.solve(np.asarray(rhs, dtype=float))
        if not np.all(np.isfinite(x)):
            raise SingularMatrixError(first_zero_pivot(self.matrix))
        return x


def first_zero_pivot(matrix) -> int | None:
    """Row of the first zero pivot of a dense LU with partial pivoting.

    Structurally empty rows are reported directly; the dense fallback is
    only attempted for small systems.
    """
    m = csr(matrix)
    empty = np.flatnonzero(np.diff(m.indptr) == 0)
    if empty.size:
        return int(empty[0])
    nz_rows = np.abs(m).sum(axis=1).A1
    if np.any(nz_rows == 0):
        return int(np.flatnonzero(nz_rows == 0)[0])
    if m.shape[0] > 3000:
        return None
    dense = m.toarray()
    _, _, u = scipy.linalg.lu(dense)
    diag = np.abs(np.diag(u))
    scale = max(np.abs(dense).max(), 1.0)
    small = np.flatnonzero(diag <= 1e-14 * scale)
    return int(small[0]) if small.size else None


def sparse_solve(matrix, rhs, method: str = "lu", tol: float = 1e-12) -> np.ndarray:
    """Solve ``matrix @ x = rhs``.

    ``method="lu"`` is the default direct path; ``"gmres"`` uses an
    ILU-preconditioned Krylov solver.
    """
    m = csr(matrix)
    if method == "lu":
        return Factorization(m).solve(rhs)
    if method == "gmres":
        try:
            ilu = spla.spilu(m.tocsc(), drop_tol=1e-5, fill_factor=20)
        except RuntimeError:
            raise SingularMatrixError(first_zero_pivot(m)) from None
        prec = spla.LinearOperator(m.shape, ilu.solve)
        x, info = spla.gmres(m, rhs, M=prec, rtol=tol, atol=0.0, restart=100, maxiter=1000)
        if info != 0:
            raise np.linalg.LinAlgError(f"gmres did not converge (info={info})")
        return x
    raise ValueError(f"unknown method {method!r}")


def relative_residual(matrix, x, rhs) -> float:
    """``|Mx - b|_2 / (|M|_inf |x|_2 + |b|_2)``."""
    m = csr(matrix)
    r = m @ x - rhs
    norm_inf = np.abs(m).sum(axis=1).max()
    return float(np.linalg.norm(r) / (norm_inf * np.linalg.norm(x) + np.linalg.norm(rhs)))


def write_matrix_market(path, matrix) -> None:
    scipy.io.mmwrite(str(path), sp.coo_matrix(matrix))
