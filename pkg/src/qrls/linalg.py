"""Sparse storage, products and the dense verification oracles.

Every matrix in the pipeline is real, so everything here is float64. Dense
routines refuse inputs above ``DENSE_CAP`` rows instead of silently burning
minutes of LAPACK time.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from . import kernels

DENSE_CAP = 4096


class LinalgError(ValueError):
    """Base class for errors raised by the numerical kernels."""


class DimensionError(LinalgError):
    pass


class SizeCapError(LinalgError):
    def __init__(self, rows, cap):
        super().__init__(f"matrix with {rows} rows exceeds the dense size cap of {cap} rows")
        self.rows = rows
        self.cap = cap


class SingularMatrixError(LinalgError):
    def __init__(self, cond):
        super().__init__(f"matrix is numerically singular (condition estimate {cond:.3e})")
        self.cond = cond


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Canonical CSR matrix: sorted column indices, no duplicates, no stored zeros.

    Build instances with :meth:`from_triplets` or :meth:`from_dense`; the
    constructor itself does not canonicalize.
    """

    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    d: int = field(default=-1)

    def __post_init__(self):
        if self.d < 0:
            object.__setattr__(self, "d", self._max_nnz())
        for arr in (self.row_offsets, self.col_indices, self.values):
            arr.setflags(write=False)

    @classmethod
    def from_triplets(cls, rows, cols, vals, shape) -> SparseMatrix:
        """Assemble from coordinate triplets, summing duplicates and dropping zeros."""
        n_rows, n_cols = int(shape[0]), int(shape[1])
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=np.float64).ravel()
        if not (rows.shape == cols.shape == vals.shape):
            raise DimensionError("triplet arrays must have equal length")
        if rows.size and (rows.min() < 0 or rows.max() >= n_rows
                          or cols.min() < 0 or cols.max() >= n_cols):
            raise DimensionError(f"triplet index outside shape {n_rows}x{n_cols}")
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if rows.size:
            start = np.ones(rows.size, dtype=bool)
            start[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            idx = np.flatnonzero(start)
            vals = np.add.reduceat(vals, idx)
            rows, cols = rows[idx], cols[idx]
            keep = vals != 0.0
            rows, cols, vals = rows[keep], cols[keep], vals[keep]
        offsets = np.zeros(n_rows + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n_rows), out=offsets[1:])
        return cls(n_rows, n_cols, offsets, cols.copy(), vals.copy())

    @classmethod
    def from_dense(cls, a) -> SparseMatrix:
        a = np.atleast_2d(np.asarray(a, dtype=np.float64))
        r, c = np.nonzero(a)
        return cls.from_triplets(r, c, a[r, c], a.shape)

    @classmethod
    def identity(cls, n: int) -> SparseMatrix:
        i = np.arange(n)
        return cls.from_triplets(i, i, np.ones(n), (n, n))

    @classmethod
    def diagonal_matrix(cls, diag) -> SparseMatrix:
        diag = np.asarray(diag, dtype=np.float64)
        i = np.arange(diag.size)
        return cls.from_triplets(i, i, diag, (diag.size, diag.size))

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    def row_ids(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_rows, dtype=np.int64), np.diff(self.row_offsets))

    def triplets(self):
        return self.row_ids(), self.col_indices.copy(), self.values.copy()

    def _max_nnz(self) -> int:
        if self.values.size == 0:
            return 0
        per_row = np.diff(self.row_offsets).max()
        per_col = np.bincount(self.col_indices, minlength=self.n_cols).max()
        return int(max(per_row, per_col))

    def diagonal(self) -> np.ndarray:
        out = np.zeros(min(self.shape))
        rows = self.row_ids()
        on = rows == self.col_indices
        out[rows[on]] = self.values[on]
        return out

    def transpose(self) -> SparseMatrix:
        r, c, v = self.triplets()
        return SparseMatrix.from_triplets(c, r, v, (self.n_cols, self.n_rows))

    T = property(transpose)

    def scaled_rows(self, s) -> SparseMatrix:
        """diag(s) @ self."""
        s = np.asarray(s, dtype=np.float64)
        r, c, v = self.triplets()
        return SparseMatrix.from_triplets(r, c, v * s[r], self.shape)

    def to_dense(self, cap: int | None = DENSE_CAP) -> np.ndarray:
        if cap is not None and max(self.shape) > cap:
            raise SizeCapError(max(self.shape), cap)
        out = np.zeros(self.shape)
        out[self.row_ids(), self.col_indices] = self.values
        return out

    def is_symmetric(self) -> bool:
        t = self.transpose()
        return (self.shape == t.shape
                and np.array_equal(self.row_offsets, t.row_offsets)
                and np.array_equal(self.col_indices, t.col_indices)
                and np.array_equal(self.values, t.values))

    def __matmul__(self, x):
        return spmv(self, x)

    def __eq__(self, other):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return (self.shape == other.shape
                and np.array_equal(self.row_offsets, other.row_offsets)
                and np.array_equal(self.col_indices, other.col_indices)
                and np.array_equal(self.values, other.values))

    __hash__ = None

    def __repr__(self):
        return f"SparseMatrix({self.n_rows}x{self.n_cols}, nnz={self.nnz}, d={self.d})"


def spmv(A: SparseMatrix, x) -> np.ndarray:
    """Return ``A @ x``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != A.n_cols:
        raise DimensionError(f"cannot multiply {A.n_rows}x{A.n_cols} matrix by vector of shape {x.shape}")
    return kernels.csr_matvec(A.row_offsets, A.col_indices, A.values, x)


def dense_singular_bounds(A: SparseMatrix, cap: int = DENSE_CAP):
    """Extreme singular values ``(sigma_min, sigma_max)`` from a full dense SVD."""
    s = scipy.linalg.svdvals(A.to_dense(cap))
    return float(s.min()), float(s.max())


def hermitian_dilation(M: SparseMatrix) -> SparseMatrix:
    """Symmetric ``[[0, M], [M^T, 0]]``; its eigenvalues are plus/minus the singular values of M."""
    if M.n_rows != M.n_cols:
        raise DimensionError(f"dilation needs a square matrix, got {M.n_rows}x{M.n_cols}")
    n = M.n_rows
    r, c, v = M.triplets()
    rows = np.concatenate([r, c + n])
    cols = np.concatenate([c + n, r])
    return SparseMatrix.from_triplets(rows, cols, np.concatenate([v, v]), (2 * n, 2 * n))


def _is_lower_triangular(A: SparseMatrix) -> bool:
    return bool(np.all(A.col_indices <= A.row_ids()))


def dense_solve(A: SparseMatrix, b, cap: int = DENSE_CAP) -> np.ndarray:
    """Direct dense solve of ``A x = b``.

    Lower-triangular matrices (the block iteration matrices) go through
    forward substitution; everything else through pivoted LU.
    """
    if A.n_rows != A.n_cols:
        raise DimensionError(f"dense_solve needs a square matrix, got {A.n_rows}x{A.n_cols}")
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (A.n_rows,):
        raise DimensionError(f"right-hand side has shape {b.shape}, expected ({A.n_rows},)")
    dense = A.to_dense(cap)
    if _is_lower_triangular(A):
        diag = np.abs(np.diag(dense))
        if diag.min() == 0.0:
            raise SingularMatrixError(np.inf)
        return scipy.linalg.solve_triangular(dense, b, lower=True, check_finite=False)
    with warnings.catch_warnings():
        # an exactly singular factor is reported below as SingularMatrixError
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(dense, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= np.finfo(float).eps * pivots.max() * A.n_rows:
        raise SingularMatrixError(np.linalg.cond(dense))
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)


# Matrix Market coordinate files -------------------------------------------------

_MM_HEADER = "%%MatrixMarket matrix coordinate real general"


def write_matrix_market(path, A: SparseMatrix, comments=()):
    """Write ``A`` as 1-based ``row col value`` triplets."""
    r, c, v = A.triplets()
    lines = [_MM_HEADER]
    lines += [f"% {line}" for line in comments]
    lines.append(f"{A.n_rows} {A.n_cols} {A.nnz}")
    lines += [f"{i + 1} {j + 1} {x:.17e}" for i, j, x in zip(r, c, v)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix_market(path) -> SparseMatrix:
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("%%MatrixMarket"):
        raise LinalgError(f"{path}: missing %%MatrixMarket header")
    header = text[0].lower().split()
    if "coordinate" not in header or not ({"real", "integer"} & set(header)):
        raise LinalgError(f"{path}: only real coordinate files are supported")
    symmetric = "symmetric" in header
    body = [ln for ln in text[1:] if ln.strip() and not ln.lstrip().startswith("%")]
    n_rows, n_cols, nnz = (int(t) for t in body[0].split())
    entries = body[1:]
    if len(entries) != nnz:
        raise LinalgError(f"{path}: header announces {nnz} entries, found {len(entries)}")
    rows, cols, vals = [], [], []
    for ln in entries:
        i, j, x = ln.split()[:3]
        rows.append(int(i) - 1)
        cols.append(int(j) - 1)
        vals.append(float(x))
    rows, cols, vals = np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64), np.array(vals)
    if symmetric:
        off = rows != cols
        rows, cols, vals = (np.concatenate([rows, cols[off]]), np.concatenate([cols, rows[off]]),
                            np.concatenate([vals, vals[off]]))
    return SparseMatrix.from_triplets(rows, cols, vals, (n_rows, n_cols))


def write_vector(path, x, comments=()):
    """Vectors are stored as ``n x 1`` coordinate matrices."""
    x = np.asarray(x, dtype=np.float64)
    write_matrix_market(path, SparseMatrix.from_dense(x.reshape(-1, 1)), comments)


def read_vector(path) -> np.ndarray:
    m = read_matrix_market(path)
    if m.n_cols != 1:
        raise LinalgError(f"{path}: expected a single column, got {m.n_cols}")
    return m.to_dense(cap=None).ravel()
