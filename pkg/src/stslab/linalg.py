"""Sparsity patterns, pattern-bound CSR matrices and the slab solvers."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numba
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)


class PatternError(IndexError):
    """Raised when a value is written outside the sparsity pattern."""


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SparsityPattern:
    """CSR index structure with sorted, unique column indices per row."""

    indptr: np.ndarray
    indices: np.ndarray
    shape: tuple[int, int]

    @classmethod
    def from_coo(cls, rows, cols, shape) -> "SparsityPattern":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        keys = np.unique(rows * shape[1] + cols)
        r, c = np.divmod(keys, shape[1])
        indptr = np.zeros(shape[0] + 1, dtype=np.int64)
        np.add.at(indptr, r + 1, 1)
        return cls(np.cumsum(indptr), c, (int(shape[0]), int(shape[1])))

    @classmethod
    def from_pairs(cls, pairs, shape) -> "SparsityPattern":
        pairs = list(pairs)
        if not pairs:
            return cls(np.zeros(shape[0] + 1, dtype=np.int64), np.zeros(0, dtype=np.int64), shape)
        r, c = zip(*pairs)
        return cls.from_coo(r, c, shape)

    @property
    def nnz(self) -> int:
        return len(self.indices)

    @property
    def rows(self) -> np.ndarray:
        return np.repeat(np.arange(self.shape[0]), np.diff(self.indptr))

    @property
    def keys(self) -> np.ndarray:
        # globally sorted because rows ascend and columns ascend within a row
        return self.rows * self.shape[1] + self.indices

    def pairs(self) -> set[tuple[int, int]]:
        return set(zip(self.rows.tolist(), self.indices.tolist()))

    def row(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i] : self.indptr[i + 1]]

    def row_length(self, i: int) -> int:
        return int(self.indptr[i + 1] - self.indptr[i])

    def __contains__(self, ij) -> bool:
        i, j = ij
        row = self.row(i)
        k = np.searchsorted(row, j)
        return bool(k < len(row) and row[k] == j)

    def positions(self, rows, cols) -> np.ndarray:
        """Value-array positions of ``(rows, cols)``; raises if any is absent."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if rows.size and (rows.min() < 0 or rows.max() >= self.shape[0] or cols.min() < 0 or cols.max() >= self.shape[1]):
            raise PatternError("index outside matrix dimensions")
        keys = self.keys
        query = rows * self.shape[1] + cols
        pos = np.searchsorted(keys, query)
        ok = pos < len(keys)
        ok[ok] = keys[pos[ok]] == query[ok]
        if not np.all(ok):
            bad = np.flatnonzero(~ok)[0]
            raise PatternError(f"entry ({rows[bad]}, {cols[bad]}) is not in the sparsity pattern")
        return pos

    def issubset(self, other: "SparsityPattern") -> bool:
        return self.shape == other.shape and bool(np.all(np.isin(self.keys, other.keys)))

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix((np.ones(self.nnz), self.indices, self.indptr), shape=self.shape)


class CsrMatrix:
    """Value array aligned with a fixed :class:`SparsityPattern`.

    Writes outside the pattern raise :class:`PatternError`.
    """

    def __init__(self, pattern: SparsityPattern, data: np.ndarray | None = None):
        self.pattern = pattern
        self.data = np.zeros(pattern.nnz) if data is None else np.asarray(data, dtype=float)
        if len(self.data) != pattern.nnz:
            raise ValueError("value array does not match the pattern")

    @property
    def shape(self) -> tuple[int, int]:
        return self.pattern.shape

    @property
    def nnz(self) -> int:
        return self.pattern.nnz

    def add_entry(self, i: int, j: int, value: float) -> None:
        self.data[self.pattern.positions([i], [j])[0]] += value

    def add_values(self, rows, cols, values) -> None:
        """Accumulate many entries at once; duplicates are summed."""
        pos = self.pattern.positions(rows, cols)
        np.add.at(self.data, pos, np.asarray(values, dtype=float).ravel())

    def add_scipy(self, mat: sp.spmatrix, drop_below: float = 0.0) -> None:
        coo = sp.coo_matrix(mat)
        keep = np.abs(coo.data) > drop_below
        self.add_values(coo.row[keep], coo.col[keep], coo.data[keep])

    def __getitem__(self, ij) -> float:
        i, j = ij
        if (i, j) not in self.pattern:
            return 0.0
        return float(self.data[self.pattern.positions([i], [j])[0]])

    def spmv(self, x: np.ndarray) -> np.ndarray:
        return self.to_scipy() @ np.asarray(x, dtype=float)

    def __matmul__(self, x):
        return self.spmv(x)

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.data, self.pattern.indices, self.pattern.indptr), shape=self.shape)

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def copy(self) -> "CsrMatrix":
        return CsrMatrix(self.pattern, self.data.copy())


def add_entry(A: CsrMatrix, i: int, j: int, v: float) -> None:
    A.add_entry(i, j, v)


def spmv(A: CsrMatrix, x: np.ndarray) -> np.ndarray:
    return A.spmv(x)


# --- ILU(0) -----------------------------------------------------------------


@numba.njit(cache=True)
def _ilu0_factor(n, indptr, indices, data):
    lu = data.copy()
    diag = np.full(n, -1, dtype=np.int64)
    marker = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        for p in range(indptr[i], indptr[i + 1]):
            if indices[p] == i:
                diag[i] = p
    for i in range(n):
        if diag[i] < 0:
            return lu, diag, i
    for i in range(n):
        for p in range(indptr[i], indptr[i + 1]):
            marker[indices[p]] = p
        for p in range(indptr[i], indptr[i + 1]):
            k = indices[p]
            if k >= i:
                break
            lu[p] /= lu[diag[k]]
            for q in range(diag[k] + 1, indptr[k + 1]):
                m = marker[indices[q]]
                if m >= 0:
                    lu[m] -= lu[p] * lu[q]
        for p in range(indptr[i], indptr[i + 1]):
            marker[indices[p]] = -1
        if lu[diag[i]] == 0.0:
            return lu, diag, i
    return lu, diag, -1


@numba.njit(cache=True)
def _ilu0_solve(n, indptr, indices, lu, diag, b):
    y = b.copy()
    for i in range(n):
        acc = y[i]
        for p in range(indptr[i], diag[i]):
            acc -= lu[p] * y[indices[p]]
        y[i] = acc
    for i in range(n - 1, -1, -1):
        acc = y[i]
        for p in range(diag[i] + 1, indptr[i + 1]):
            acc -= lu[p] * y[indices[p]]
        y[i] = acc / lu[diag[i]]
    return y


class ILU0:
    """Incomplete LU factorisation without fill; factors share the input pattern."""

    def __init__(self, A: CsrMatrix | sp.csr_matrix):
        if isinstance(A, CsrMatrix):
            indptr, indices, data = A.pattern.indptr, A.pattern.indices, A.data
            n = A.shape[0]
        else:
            A = sp.csr_matrix(A)
            A.sort_indices()
            indptr, indices, data = A.indptr.astype(np.int64), A.indices.astype(np.int64), A.data
            n = A.shape[0]
        self.n = n
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int64)
        self.lu, self.diag, bad = _ilu0_factor(n, self.indptr, self.indices, np.ascontiguousarray(data, dtype=float))
        if bad >= 0:
            raise SolverError(f"ILU(0) breakdown: missing or zero pivot in row {bad}")

    def solve(self, b: np.ndarray) -> np.ndarray:
        return _ilu0_solve(self.n, self.indptr, self.indices, self.lu, self.diag, np.ascontiguousarray(b, dtype=float))

    def as_operator(self) -> spla.LinearOperator:
        return spla.LinearOperator((self.n, self.n), matvec=self.solve, dtype=float)

    def factors(self) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        """Unit lower ``L`` and upper ``U`` on the original pattern."""
        full = sp.csr_matrix((self.lu, self.indices, self.indptr), shape=(self.n, self.n))
        L = sp.tril(full, k=-1, format="csr") + sp.identity(self.n, format="csr")
        U = sp.triu(full, k=0, format="csr")
        return L, U


# --- solvers ----------------------------------------------------------------


def solve_gmres_ilu0(
    A: CsrMatrix | sp.spmatrix,
    b: np.ndarray,
    rtol: float = 1e-12,
    max_iter: int = 5000,
    restart: int = 50,
    preconditioner: ILU0 | None = None,
    x0: np.ndarray | None = None,
) -> tuple[np.ndarray, int]:
    """Restarted GMRES with an ILU(0) preconditioner.

    Returns ``(x, iterations)``.  Convergence is judged on the true residual
    ``||b - A x|| <= rtol ||b||``; a :class:`SolverError` is raised when it is
    not reached within ``max_iter`` inner iterations.
    """
    mat = A.to_scipy() if isinstance(A, CsrMatrix) else sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), 0
    M = (preconditioner or ILU0(A if isinstance(A, CsrMatrix) else mat)).as_operator()

    iterations = 0

    def count(_):
        nonlocal iterations
        iterations += 1

    x = np.zeros_like(b) if x0 is None else np.asarray(x0, dtype=float).copy()
    target = rtol * bnorm
    inner_tol = rtol
    while True:
        budget = max_iter - iterations
        if budget <= 0:
            break
        x, _ = spla.gmres(
            mat, b, x0=x, rtol=inner_tol, atol=0.0, restart=restart,
            maxiter=max(1, budget // restart + 1), M=M, callback=count, callback_type="pr_norm",
        )
        res = np.linalg.norm(b - mat @ x)
        if res <= target:
            return x, iterations
        # the preconditioned residual met its test but the true one did not
        inner_tol = max(inner_tol * 0.1, 1e-16)
        if inner_tol <= 1e-16 and res > target:
            break
    raise SolverError(f"GMRES did not reach rtol={rtol:g} within {max_iter} iterations (residual {res / bnorm:.3e})")


def solve_dense_lu(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gaussian elimination with partial pivoting; an oracle for small systems."""
    A = np.array(A, dtype=float)
    x = np.array(b, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or x.shape[0] != n:
        raise ValueError("dense LU expects a square matrix and a matching right-hand side")
    if n > 5000:
        raise ValueError("dense LU is limited to n <= 5000")
    scale = np.max(np.abs(A)) if A.size else 0.0
    for k in range(n):
        p = k + int(np.argmax(np.abs(A[k:, k])))
        if abs(A[p, k]) <= 1e-14 * scale or scale == 0.0:
            raise np.linalg.LinAlgError(f"matrix is singular to working precision (column {k})")
        if p != k:
            A[[k, p]] = A[[p, k]]
            x[[k, p]] = x[[p, k]]
        A[k + 1 :, k] /= A[k, k]
        A[k + 1 :, k + 1 :] -= np.outer(A[k + 1 :, k], A[k, k + 1 :])
        x[k + 1 :] -= A[k + 1 :, k] * x[k]
    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - A[k, k + 1 :] @ x[k + 1 :]) / A[k, k]
    return x


def write_matrix_market(A: CsrMatrix | sp.spmatrix, path) -> None:
    coo = sp.coo_matrix(A.to_scipy() if isinstance(A, CsrMatrix) else A)
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        fh.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i + 1} {j + 1} {v:.17g}\n")
