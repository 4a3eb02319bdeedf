"""Poisson model problems on uniform grids and their spectral bounds.

Both dimensions use linear elements with the element stiffness kept at stencil
scale (entries of order one) and the ``1/h`` factor moved into the load, which
becomes ``h**2`` times the lumped nodal weight. The assembled operator is the
positive definite ``-Laplacian``, so for the unit load the 1D case-a solution is
the parabola ``x (L - x) / 2`` sampled at the nodes.

2D operators are ``My (x) Kx + Ky (x) Mx`` with ``K`` the free-free 1D stiffness
and ``M`` the lumped 1D mass. On a right-angle triangulation this is the 5-point
stencil: 4 at interior nodes, 2 on a free edge, 1 at a free corner. Dirichlet
nodes are removed, every other boundary gets a homogeneous natural condition.
Degrees of freedom are numbered row-major (y slow, x fast).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .linalg import DENSE_CAP, LinalgError, SizeCapError, SparseMatrix

CASES = {1: ("a", "b"), 2: ("a", "b", "c")}

# Dirichlet edges per 2D case
_DIRICHLET_2D = {
    "a": ("x0", "y0", "xL"),
    "b": ("x0", "y0"),
    "c": ("x0",),
}


class ProblemError(ValueError):
    pass


class BoundsMethod(str, enum.Enum):
    GERSHGORIN = "gershgorin"
    DENSE_EXACT = "dense_exact"
    ANALYTIC = "analytic"


@dataclass(frozen=True)
class ProblemSpec:
    """Which Poisson problem to assemble.

    ``n_nodes_per_dim`` counts grid nodes including boundary nodes. 2D grids may
    be rectangular through ``n_nodes_y``; the spacing is ``length / (n - 1)`` in
    both directions.
    """

    dim: int
    case_label: str
    n_nodes_per_dim: int
    length: float = 1.0
    n_nodes_y: int | None = None

    def __post_init__(self):
        if self.dim not in CASES:
            raise ProblemError(f"dim must be 1 or 2, got {self.dim}")
        if self.case_label not in CASES[self.dim]:
            raise ProblemError(
                f"case {self.case_label!r} invalid for dim={self.dim}; choose from {CASES[self.dim]}")
        if self.n_nodes_per_dim < 2 or (self.n_nodes_y is not None and self.n_nodes_y < 2):
            raise ProblemError("need at least 2 nodes per dimension")
        if self.case_label == "a" and self.n_nodes_per_dim < 3:
            raise ProblemError("case a has Dirichlet nodes at both x ends and needs at least 3 nodes")
        if self.dim == 1 and self.n_nodes_y is not None:
            raise ProblemError("n_nodes_y only applies to 2D problems")
        if not self.length > 0:
            raise ProblemError("length must be positive")

    @classmethod
    def from_dofs(cls, dim: int, case_label: str, dofs_per_dim: int, length: float = 1.0) -> ProblemSpec:
        """Pick the grid whose retained unknowns form ``dofs_per_dim`` per direction.

        1D gives ``dofs_per_dim`` unknowns, 2D gives ``dofs_per_dim**2``.
        """
        k = int(dofs_per_dim)
        if dim == 1:
            n = k + 2 if case_label == "a" else k + 1
            return cls(1, case_label, n, length)
        nx, ny = {"a": (k + 2, k + 1), "b": (k + 1, k + 1), "c": (k + 1, k)}.get(case_label, (k, k))
        return cls(2, case_label, nx, length, ny if ny != nx else None)

    @property
    def nx(self) -> int:
        return self.n_nodes_per_dim

    @property
    def ny(self) -> int:
        return self.n_nodes_y if self.n_nodes_y is not None else self.n_nodes_per_dim

    @property
    def h(self) -> float:
        return self.length / (self.n_nodes_per_dim - 1)

    @property
    def label(self) -> str:
        return f"{self.dim}d{self.case_label}"


@dataclass(frozen=True)
class SpectralBounds:
    """``a <= lambda_min`` (smallest nonzero eigenvalue) and ``lambda_max <= b``."""

    a: float | None
    b: float
    method: BoundsMethod = BoundsMethod.DENSE_EXACT

    @property
    def kappa(self) -> float:
        if not self.a:
            raise ProblemError("lower spectral bound unknown")
        return self.b / self.a


def _stiffness_1d(n: int) -> SparseMatrix:
    """Free-free linear-element stiffness times h: diag (1, 2, ..., 2, 1), off-diagonal -1."""
    i = np.arange(n)
    diag = np.full(n, 2.0)
    diag[[0, -1]] = 1.0
    rows = np.concatenate([i, i[:-1], i[1:]])
    cols = np.concatenate([i, i[1:], i[:-1]])
    vals = np.concatenate([diag, -np.ones(n - 1), -np.ones(n - 1)])
    return SparseMatrix.from_triplets(rows, cols, vals, (n, n))


def _lumped_weights(n: int) -> np.ndarray:
    w = np.ones(n)
    w[[0, -1]] = 0.5
    return w


def _kron(A: SparseMatrix, B: SparseMatrix) -> SparseMatrix:
    ra, ca, va = A.triplets()
    rb, cb, vb = B.triplets()
    rows = (ra[:, None] * B.n_rows + rb[None, :]).ravel()
    cols = (ca[:, None] * B.n_cols + cb[None, :]).ravel()
    vals = (va[:, None] * vb[None, :]).ravel()
    return SparseMatrix.from_triplets(rows, cols, vals, (A.n_rows * B.n_rows, A.n_cols * B.n_cols))


def _restrict(A: SparseMatrix, keep: np.ndarray) -> SparseMatrix:
    """Principal submatrix on the boolean mask ``keep``."""
    new_index = np.full(A.n_rows, -1, dtype=np.int64)
    new_index[keep] = np.arange(int(keep.sum()))
    r, c, v = A.triplets()
    mask = keep[r] & keep[c]
    m = int(keep.sum())
    return SparseMatrix.from_triplets(new_index[r[mask]], new_index[c[mask]], v[mask], (m, m))


def _check_dim(spec: ProblemSpec, dim: int):
    if spec.dim != dim:
        raise ProblemError(f"expected a {dim}D problem, got dim={spec.dim}")


def assemble_1d(spec: ProblemSpec):
    """Return ``(A, b)`` for ``-u'' = 1`` on ``(0, L)`` with the case's Dirichlet ends removed."""
    _check_dim(spec, 1)
    n = spec.n_nodes_per_dim
    keep = np.ones(n, dtype=bool)
    keep[0] = False
    if spec.case_label == "a":
        keep[-1] = False
    A = _restrict(_stiffness_1d(n), keep)
    b = spec.h ** 2 * _lumped_weights(n)[keep]
    return A, b


def _dirichlet_mask_2d(spec: ProblemSpec) -> np.ndarray:
    nx, ny = spec.nx, spec.ny
    ix, iy = np.meshgrid(np.arange(nx), np.arange(ny))
    fixed = np.zeros((ny, nx), dtype=bool)
    for edge in _DIRICHLET_2D[spec.case_label]:
        fixed |= {"x0": ix == 0, "xL": ix == nx - 1, "y0": iy == 0}[edge]
    return ~fixed.ravel()


def assemble_2d(spec: ProblemSpec):
    """Return ``(A, b)`` for ``-lap u = 1`` on the grid with the case's Dirichlet edges removed."""
    _check_dim(spec, 2)
    nx, ny = spec.nx, spec.ny
    mx = SparseMatrix.diagonal_matrix(_lumped_weights(nx))
    my = SparseMatrix.diagonal_matrix(_lumped_weights(ny))
    kx, ky = _stiffness_1d(nx), _stiffness_1d(ny)
    a_x, a_y = _kron(my, kx), _kron(ky, mx)
    r1, c1, v1 = a_x.triplets()
    r2, c2, v2 = a_y.triplets()
    full = SparseMatrix.from_triplets(np.concatenate([r1, r2]), np.concatenate([c1, c2]),
                                      np.concatenate([v1, v2]), a_x.shape)
    keep = _dirichlet_mask_2d(spec)
    A = _restrict(full, keep)
    b = spec.h ** 2 * np.kron(_lumped_weights(ny), _lumped_weights(nx))[keep]
    return A, b


def assemble(spec: ProblemSpec):
    return assemble_1d(spec) if spec.dim == 1 else assemble_2d(spec)


def dof_coordinates(spec: ProblemSpec) -> np.ndarray:
    """Coordinates of the retained unknowns, shape ``(N, dim)``."""
    h = spec.h
    if spec.dim == 1:
        x = h * np.arange(spec.nx)
        keep = np.ones(spec.nx, dtype=bool)
        keep[0] = False
        if spec.case_label == "a":
            keep[-1] = False
        return x[keep, None]
    ix, iy = np.meshgrid(np.arange(spec.nx), np.arange(spec.ny))
    xy = np.column_stack([h * ix.ravel(), h * iy.ravel()])
    return xy[_dirichlet_mask_2d(spec)]


def exact_solution_1d(spec: ProblemSpec) -> np.ndarray:
    """Nodal values of the continuous solution, which linear elements reproduce exactly."""
    _check_dim(spec, 1)
    x = dof_coordinates(spec)[:, 0]
    L = spec.length
    if spec.case_label == "a":
        return x * (L - x) / 2
    return x * (2 * L - x) / 2


def periodic_laplacian_1d(n: int) -> SparseMatrix:
    """Singular circulant stencil (-1, 2, -1); its null space is the constant vector."""
    if n < 3:
        raise ProblemError("periodic stencil needs n >= 3")
    i = np.arange(n)
    rows = np.concatenate([i, i, i])
    cols = np.concatenate([i, (i + 1) % n, (i - 1) % n])
    vals = np.concatenate([np.full(n, 2.0), -np.ones(n), -np.ones(n)])
    return SparseMatrix.from_triplets(rows, cols, vals, (n, n))


def _tridiagonal_pattern(A: SparseMatrix):
    """Return 'dirichlet' or 'free_end' for the two 1D stencils, else None."""
    n = A.n_rows
    if n != A.n_cols or n == 0:
        return None
    diag = np.full(n, 2.0)
    expected = SparseMatrix.from_triplets(
        np.concatenate([np.arange(n), np.arange(n - 1), np.arange(1, n)]),
        np.concatenate([np.arange(n), np.arange(1, n), np.arange(n - 1)]),
        np.concatenate([diag, -np.ones(n - 1), -np.ones(n - 1)]), (n, n))
    if A == expected:
        return "dirichlet"
    if n > 1:
        diag[-1] = 1.0
    else:
        diag[0] = 1.0
    free = SparseMatrix.from_triplets(
        np.concatenate([np.arange(n), np.arange(n - 1), np.arange(1, n)]),
        np.concatenate([np.arange(n), np.arange(1, n), np.arange(n - 1)]),
        np.concatenate([diag, -np.ones(n - 1), -np.ones(n - 1)]), (n, n))
    return "free_end" if A == free else None


def analytic_spectrum(A: SparseMatrix) -> np.ndarray:
    """Closed-form eigenvalues of the two 1D stencils, ascending."""
    kind = _tridiagonal_pattern(A)
    n = A.n_rows
    k = np.arange(1, n + 1)
    if kind == "dirichlet":
        return 2 - 2 * np.cos(k * np.pi / (n + 1))
    if kind == "free_end":
        return 2 - 2 * np.cos((2 * k - 1) * np.pi / (2 * n + 1))
    raise ProblemError("no closed-form spectrum for this matrix (only 1D stencils are covered)")


def spectral_bounds(A: SparseMatrix, method="dense_exact", lower: float | None = None,
                    cap: int = DENSE_CAP) -> SpectralBounds:
    """Bounds on the extreme (nonzero) eigenvalues of symmetric ``A``.

    ``gershgorin`` gives only the upper bound; pass ``lower`` to complete it.
    ``dense_exact`` discards eigenvalues below ``1e-10 * lambda_max`` as zero.
    """
    method = BoundsMethod(method)
    if method is BoundsMethod.GERSHGORIN:
        row_sums = np.bincount(A.row_ids(), weights=np.abs(A.values), minlength=A.n_rows)
        return SpectralBounds(lower, float(row_sums.max()), method)
    if method is BoundsMethod.ANALYTIC:
        ev = analytic_spectrum(A)
        return SpectralBounds(float(ev[0]), float(ev[-1]), method)
    if A.n_rows > cap:
        raise SizeCapError(A.n_rows, cap)
    ev = np.linalg.eigvalsh(A.to_dense(cap))
    top = float(np.abs(ev).max())
    nonzero = np.abs(ev) > 1e-10 * top
    if not nonzero.any():
        raise LinalgError("matrix has no nonzero eigenvalues")
    return SpectralBounds(float(np.abs(ev[nonzero]).min()), top, method)
