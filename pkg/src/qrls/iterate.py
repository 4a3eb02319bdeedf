"""First-order relaxation x <- (I - tau_k C^{-1} A) x + tau_k C^{-1} b.

``C`` is the identity (Richardson) or ``diag(A)`` (Jacobi). A scheme with one
``tau`` is stationary; a list of ``tau`` values taken from Chebyshev nodes on
``[a, b]`` gives the first-order Chebyshev method. The nodes are applied in
natural order, which is known to lose accuracy for long sweeps; nothing here
reorders them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .fem import SpectralBounds
from .linalg import DimensionError, SparseMatrix


class SchemeError(ValueError):
    pass


def _lower(bounds: SpectralBounds) -> float:
    if bounds.a is None or bounds.a <= 0:
        raise SchemeError(
            "need a positive lower spectral bound (use the smallest nonzero eigenvalue "
            "for semidefinite systems)")
    return bounds.a


def optimal_tau(bounds: SpectralBounds) -> float:
    """Step ``2 / (a + b)`` minimizing the stationary convergence factor."""
    return 2.0 / (_lower(bounds) + bounds.b)


def convergence_factor(bounds: SpectralBounds) -> float:
    """``(1 - a/b) / (1 + a/b)``; equals ``||I - tau A||`` for SPD ``A`` at the optimal step."""
    r = _lower(bounds) / bounds.b
    return (1 - r) / (1 + r)


def required_iterations(bounds: SpectralBounds, eps: float) -> int:
    """Stationary steps to shrink the relative error by ``eps``: ``ceil(b/a * ln(1/eps) / 2)``."""
    if not 0 < eps < 1:
        raise SchemeError(f"eps must lie in (0, 1), got {eps}")
    return math.ceil(bounds.b / _lower(bounds) * -math.log(eps) / 2)


def chebyshev_taus(bounds: SpectralBounds, l: int) -> list[float]:
    """Reciprocals of the ``l`` Chebyshev nodes mapped to ``[a, b]``."""
    a = _lower(bounds)
    if l < 1:
        raise SchemeError("l must be at least 1")
    i = np.arange(1, l + 1)
    nodes = (a + bounds.b) / 2 + (bounds.b - a) / 2 * np.cos((2 * i - 1) * np.pi / (2 * l))
    return list(1.0 / nodes)


@dataclass(frozen=True)
class Scheme:
    preconditioner: str = "identity"
    taus: tuple[float, ...] = (1.0,)
    omega: float | None = None
    bounds: SpectralBounds | None = None

    def __post_init__(self):
        if self.preconditioner not in ("identity", "jacobi"):
            raise SchemeError(f"unknown preconditioner {self.preconditioner!r}")
        if len(self.taus) == 0:
            raise SchemeError("a scheme needs at least one tau")
        object.__setattr__(self, "taus", tuple(float(t) for t in self.taus))

    @classmethod
    def richardson(cls, bounds: SpectralBounds, omega: float | None = None) -> Scheme:
        tau = omega if omega is not None else optimal_tau(bounds)
        return cls("identity", (tau,), omega, bounds)

    @classmethod
    def jacobi(cls, bounds: SpectralBounds, omega: float | None = None) -> Scheme:
        """``bounds`` must describe the spectrum of ``diag(A)^{-1} A``."""
        tau = omega if omega is not None else optimal_tau(bounds)
        return cls("jacobi", (tau,), omega, bounds)

    @classmethod
    def chebyshev(cls, bounds: SpectralBounds, l: int, preconditioner: str = "identity") -> Scheme:
        return cls(preconditioner, tuple(chebyshev_taus(bounds, l)), None, bounds)

    @property
    def stationary(self) -> bool:
        return len(self.taus) == 1

    @property
    def tau(self) -> float:
        if not self.stationary:
            raise SchemeError("non-stationary scheme has no single tau")
        return self.taus[0]

    def step_taus(self, l: int) -> np.ndarray:
        if self.stationary:
            return np.full(l, self.taus[0])
        if l > len(self.taus):
            raise SchemeError(f"Chebyshev scheme has {len(self.taus)} steps, {l} requested")
        return np.array(self.taus[:l])

    def contraction_bound(self) -> float:
        """Upper bound on ``max_i ||I - tau_i A||`` for symmetric PSD ``A`` (identity preconditioner)."""
        if self.bounds is None:
            raise SchemeError("scheme carries no spectral bounds")
        lo = self.bounds.a if self.bounds.a else 0.0
        return max(max(abs(1 - t * lo), abs(1 - t * self.bounds.b)) for t in self.taus)

    def preconditioner_inverse(self, A: SparseMatrix) -> np.ndarray:
        if self.preconditioner == "identity":
            return np.ones(A.n_rows)
        diag = A.diagonal()
        if np.any(diag == 0):
            raise SchemeError("Jacobi preconditioner needs a zero-free diagonal")
        return 1.0 / diag


@dataclass
class Trajectory:
    """Iterates ``x^(0) ... x^(l)`` (when stored) and their errors against a reference."""

    final: np.ndarray
    iterates: np.ndarray | None
    errors: np.ndarray | None

    @property
    def l(self) -> int:
        if self.iterates is not None:
            return self.iterates.shape[0] - 1
        return self.errors.shape[0] - 1

    def relative_errors(self) -> np.ndarray:
        if self.errors is None:
            raise SchemeError("trajectory was run without a reference solution")
        if self.errors[0] == 0:
            return np.zeros_like(self.errors)
        return self.errors / self.errors[0]

    def rows(self):
        """``(i, ||e_i|| / ||e_0||)`` pairs for CSV export."""
        return list(enumerate(self.relative_errors().tolist()))


def run_iterations(A: SparseMatrix, b, x0, scheme: Scheme, l: int, x_exact=None,
                   store_iterates: bool = True) -> Trajectory:
    b = np.ascontiguousarray(b, dtype=np.float64)
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    n = A.n_rows
    if A.n_cols != n or b.shape != (n,) or x0.shape != (n,):
        raise DimensionError(f"A is {A.shape}, b {b.shape}, x0 {x0.shape}")
    if l < 0:
        raise SchemeError("l must be non-negative")
    cinv = scheme.preconditioner_inverse(A)
    taus = scheme.step_taus(l)
    ref = None if x_exact is None else np.ascontiguousarray(x_exact, dtype=np.float64)
    final, errors, iterates = kernels.relaxation_run(
        A.row_offsets, A.col_indices, A.values, cinv, b, x0, taus, ref, store_iterates)
    return Trajectory(final, iterates, errors if ref is not None else None)
