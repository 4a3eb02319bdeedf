"""Block lower-bidiagonal system whose solution is the whole relaxation history.

For ``l`` steps and ``c`` copies the matrix has ``l + c + 1`` block rows of size
``N``::

    [ I                ] [x0 ]   [x_in ]
    [-R1  I            ] [x1 ]   [tau b]
    [    -R2  I        ] [x2 ] = [tau b]
    [        -I  I     ] [x3 ]   [  0  ]
    [            -I  I ] [x4 ]   [  0  ]

with ``R_i = I - tau_i C^{-1} A``. Forward substitution reproduces the
iteration, and the trailing identity couplings copy the last iterate ``c``
times. When every ``||R_i|| <= 1``, ``||M|| <= 2`` and
``||M^{-1}|| <= l + c + 1`` regardless of how badly ``A`` is conditioned.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fem import spectral_bounds
from .iterate import Scheme
from .linalg import (DENSE_CAP, DimensionError, SizeCapError, SparseMatrix, dense_singular_bounds,
                     read_matrix_market, read_vector, write_matrix_market, write_vector)

# slack for rounding in the computed norms
_BOUND_RTOL = 1e-12


class ContractionError(ValueError):
    """Some iteration block may have norm above one, so the conditioning bounds do not apply."""


class BoundViolation(AssertionError):
    pass


@dataclass(frozen=True)
class BlockSystem:
    l: int
    c: int
    N: int
    M: SparseMatrix
    y: np.ndarray
    taus: tuple[float, ...]
    norm_y: float
    norm_x_in: float
    norm_b: float
    scheme: Scheme | None = field(default=None, compare=False)

    @property
    def n_blocks(self) -> int:
        return self.l + self.c + 1

    @property
    def tau(self) -> float:
        if len(set(self.taus)) != 1:
            raise ValueError("system uses several step sizes")
        return self.taus[0]

    @property
    def success_blocks(self) -> range:
        return range(self.l, self.l + self.c + 1)

    def blocks(self, vec) -> np.ndarray:
        """View a length ``(l+c+1) N`` vector as ``(l+c+1, N)``."""
        return np.asarray(vec).reshape(self.n_blocks, self.N)

    def qubits(self) -> tuple[int, int]:
        """Index and data register widths, ``ceil(log2(l+c+1))`` and ``ceil(log2 N)``."""
        return max(1, math.ceil(math.log2(self.n_blocks))), max(1, math.ceil(math.log2(self.N)))


@dataclass(frozen=True)
class BoundsReport:
    l: int
    c: int
    norm_M: float
    norm_M_inv: float
    method: str = "dense_svd"

    @property
    def kappa_M(self) -> float:
        return self.norm_M * self.norm_M_inv

    @property
    def bound_norm(self) -> float:
        return 2.0

    @property
    def bound_inv(self) -> float:
        return float(self.l + self.c + 1)

    @property
    def bound_kappa(self) -> float:
        return 2.0 * (self.l + self.c + 1)

    def violations(self) -> list[str]:
        out = []
        for name, value, bound in (("||M||", self.norm_M, self.bound_norm),
                                   ("||M^-1||", self.norm_M_inv, self.bound_inv),
                                   ("kappa(M)", self.kappa_M, self.bound_kappa)):
            if value > bound * (1 + _BOUND_RTOL):
                out.append(f"{name} = {value:.15g} exceeds bound {bound:g}")
        return out

    @property
    def ok(self) -> bool:
        return not self.violations()


def _certify(A: SparseMatrix, scheme: Scheme, taus: np.ndarray, cap: int):
    if scheme.preconditioner == "identity":
        if not A.is_symmetric():
            raise ContractionError("identity-preconditioned blocks need a symmetric A")
        lam_max = scheme.bounds.b if scheme.bounds is not None else spectral_bounds(A, "gershgorin").b
        worst = float(np.max(taus)) * lam_max
        if np.min(taus) < 0 or worst > 2 * (1 + _BOUND_RTOL):
            raise ContractionError(
                f"tau * lambda_max = {worst:.6g} > 2, so ||I - tau A|| <= 1 is not guaranteed")
        return
    if A.n_rows > cap:
        raise ContractionError(
            f"cannot certify Jacobi blocks of size {A.n_rows} above the dense cap {cap}")
    dense = A.to_dense(cap)
    cinv = scheme.preconditioner_inverse(A)
    for t in np.unique(taus):
        norm = np.linalg.norm(np.eye(A.n_rows) - t * cinv[:, None] * dense, 2)
        if norm > 1 + _BOUND_RTOL:
            raise ContractionError(f"||I - tau C^-1 A|| = {norm:.6g} > 1 for tau = {t:.6g}")


def build_block_matrix(A: SparseMatrix, scheme: Scheme, l: int, c: int,
                       check_contraction: bool = True, cap: int = DENSE_CAP) -> SparseMatrix:
    """Assemble the ``(l+c+1) N`` square block matrix for ``l`` steps and ``c`` copies."""
    if A.n_rows != A.n_cols:
        raise DimensionError(f"A must be square, got {A.shape}")
    if l < 1 or c < 0:
        raise ValueError(f"need l >= 1 and c >= 0, got l={l}, c={c}")
    N = A.n_rows
    nb = l + c + 1
    taus = scheme.step_taus(l)
    if check_contraction:
        _certify(A, scheme, taus, cap)
    cinv = scheme.preconditioner_inverse(A)
    ar, ac, av = A.triplets()
    j = np.arange(N)
    rows, cols, vals = [], [], []
    # unit diagonal
    rows.append(np.arange(nb * N))
    cols.append(np.arange(nb * N))
    vals.append(np.ones(nb * N))
    for i in range(1, nb):
        # -R_i = tau_i C^{-1} A - I, or -I for the copy rows
        rows.append(i * N + j)
        cols.append((i - 1) * N + j)
        vals.append(-np.ones(N))
        if i <= l:
            rows.append(i * N + ar)
            cols.append((i - 1) * N + ac)
            vals.append(taus[i - 1] * cinv[ar] * av)
    return SparseMatrix.from_triplets(np.concatenate(rows), np.concatenate(cols),
                                      np.concatenate(vals), (nb * N, nb * N))


def build_rhs(b, x_in, tau, l: int, c: int):
    """Stack ``[x_in; tau_1 b; ...; tau_l b; 0; ...; 0]`` and return it with its 2-norm.

    ``tau`` may be a scalar or one value per step. For the Jacobi scheme pass
    ``C^{-1} b`` as ``b``.
    """
    b = np.asarray(b, dtype=np.float64)
    x_in = np.asarray(x_in, dtype=np.float64)
    if b.ndim != 1 or x_in.shape != b.shape:
        raise DimensionError(f"b has shape {b.shape} but x_in has shape {x_in.shape}")
    taus = np.broadcast_to(np.asarray(tau, dtype=np.float64), (l,))
    y = np.concatenate([x_in, *(t * b for t in taus), np.zeros(c * b.size)])
    return y, float(np.linalg.norm(y))


def build_block_system(A: SparseMatrix, b, x_in, scheme: Scheme, l: int, c: int | None = None,
                       check_contraction: bool = True) -> BlockSystem:
    """Matrix and right-hand side together; ``c`` defaults to ``l - 1``."""
    c = l - 1 if c is None else c
    M = build_block_matrix(A, scheme, l, c, check_contraction)
    taus = scheme.step_taus(l)
    rhs_b = np.asarray(b, dtype=np.float64) * scheme.preconditioner_inverse(A)
    y, norm_y = build_rhs(rhs_b, x_in, taus, l, c)
    return BlockSystem(l, c, A.n_rows, M, y, tuple(float(t) for t in taus), norm_y,
                       float(np.linalg.norm(x_in)), float(np.linalg.norm(b)), scheme)


def verify_block_bounds(M: SparseMatrix, l: int, c: int, cap: int = DENSE_CAP,
                        raise_on_violation: bool = True) -> BoundsReport:
    """Exact ``||M||`` and ``||M^{-1}||`` from a dense SVD, checked against the bounds."""
    if M.n_rows != (l + c + 1) * (M.n_rows // (l + c + 1)):
        raise DimensionError(f"{M.n_rows} rows do not split into {l + c + 1} blocks")
    smin, smax = dense_singular_bounds(M, cap)
    report = BoundsReport(l, c, smax, 1.0 / smin, "dense_svd")
    if raise_on_violation and not report.ok:
        raise BoundViolation("; ".join(report.violations()))
    return report


def spectral_block_singular_values(A: SparseMatrix, taus, l: int, c: int,
                                   cap: int = DENSE_CAP) -> np.ndarray:
    """All singular values of the block matrix, via the eigenbasis of symmetric ``A``.

    Every block is a polynomial in ``A``, so ``M`` is orthogonally equivalent to
    a direct sum of ``N`` scalar bidiagonal matrices, one per eigenvalue of
    ``A``. Identity preconditioner only.
    """
    if not A.is_symmetric():
        raise ValueError("spectral reduction needs a symmetric A")
    if A.n_rows > cap:
        raise SizeCapError(A.n_rows, cap)
    lam = np.linalg.eigvalsh(A.to_dense(cap))
    taus = np.broadcast_to(np.asarray(taus, dtype=np.float64), (l,))
    nb = l + c + 1
    small = np.zeros((lam.size, nb, nb))
    idx = np.arange(nb)
    small[:, idx, idx] = 1.0
    for i in range(1, nb):
        small[:, i, i - 1] = -(1.0 - taus[i - 1] * lam) if i <= l else -1.0
    return np.linalg.svd(small, compute_uv=False).ravel()


def verify_block_bounds_spectral(A: SparseMatrix, scheme: Scheme, l: int, c: int,
                                 raise_on_violation: bool = True) -> BoundsReport:
    """Same report as :func:`verify_block_bounds` without forming ``M`` densely."""
    if scheme.preconditioner != "identity":
        raise ValueError("spectral reduction covers the identity preconditioner only")
    s = spectral_block_singular_values(A, scheme.step_taus(l), l, c)
    report = BoundsReport(l, c, float(s.max()), 1.0 / float(s.min()), "spectral_blocks")
    if raise_on_violation and not report.ok:
        raise BoundViolation("; ".join(report.violations()))
    return report


def write_block_system(directory, system: BlockSystem, stem: str = "block"):
    """Write ``<stem>_M.mtx``, ``<stem>_y.mtx`` and the ``<stem>_meta.txt`` sidecar."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_matrix_market(d / f"{stem}_M.mtx", system.M)
    write_vector(d / f"{stem}_y.mtx", system.y)
    tau_text = ",".join(f"{t:.17e}" for t in system.taus) if len(set(system.taus)) > 1 \
        else f"{system.taus[0]:.17e}"
    meta = [f"l = {system.l}", f"c = {system.c}", f"N = {system.N}", f"tau = {tau_text}"]
    (d / f"{stem}_meta.txt").write_text("\n".join(meta) + "\n")


def read_block_system(directory, stem: str = "block"):
    """Return ``(M, y, meta)`` with ``meta`` holding ints ``l, c, N`` and a tuple ``tau``."""
    d = Path(directory)
    meta = {}
    for line in (d / f"{stem}_meta.txt").read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        meta[key] = tuple(float(v) for v in value.split(",")) if key == "tau" else int(value)
    return read_matrix_market(d / f"{stem}_M.mtx"), read_vector(d / f"{stem}_y.mtx"), meta
