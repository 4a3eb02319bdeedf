"""Polynomial-level emulation of a QSP linear-system solve.

A QSP circuit with phase factors for an odd polynomial ``P`` maps the encoded
right-hand side to ``P(H) |y>`` for the block-encoded Hermitian ``H``. Here the
same polynomial is applied directly: ``H`` is half the Hermitian dilation of the
block matrix, whose spectrum then sits in ``[-1, -1/kappa] U [1/kappa, 1]``
with ``kappa = 2 (l + c + 1)``, and ``P ~ 1/x`` on that set.

Coefficients come from a discrete least-squares projection of ``1/x`` onto odd
Chebyshev polynomials, sampled on Chebyshev points of ``[1/kappa, 1]`` (oddness
covers the negative half). The degree is the smallest odd one whose error on a
certification grid meets the target. Above ``LSTSQ_MAX_DEGREE`` the dense fit
gets too large, so the coefficients are instead interpolated from the entire
odd function ``(1 - exp(-(s x)^2)) / x``, which matches ``1/x`` away from zero.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.fft
import scipy.linalg
import scipy.optimize

from . import kernels
from .blocksys import BlockSystem
from .linalg import DENSE_CAP, hermitian_dilation, dense_solve
from .state import StateVector

DEGREE_CAP = 20000
GRID_POINTS = 10_000
LSTSQ_MAX_DEGREE = 4095


class QlsaError(ValueError):
    pass


class DegreeCapError(QlsaError):
    def __init__(self, cap, achieved):
        super().__init__(f"degree cap {cap} reached with certified error {achieved:.3e}")
        self.cap = cap
        self.achieved = achieved


@dataclass(frozen=True, eq=False)
class InverseApproximant:
    """Odd Chebyshev series ``sum_k coefficients[k] T_k(x)`` close to ``1/x`` for ``1/kappa <= |x| <= 1``."""

    kappa: float
    delta_poly: float
    degree: int
    coefficients: np.ndarray
    certified_error: float

    def __call__(self, x):
        x = np.ascontiguousarray(np.atleast_1d(x), dtype=np.float64)
        return kernels.chebyshev_eval(self.coefficients, x)

    def save(self, path):
        """Plain text: comment lines, the degree, then ``degree + 1`` coefficients."""
        lines = [f"# kappa = {self.kappa!r}",
                 f"# delta_poly = {self.delta_poly!r}",
                 f"# certified_error = {self.certified_error!r}",
                 str(self.degree)]
        lines += [f"{c:.17e}" for c in self.coefficients]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> InverseApproximant:
        meta, body = {}, []
        for line in Path(path).read_text().splitlines():
            if line.startswith("#"):
                key, value = line[1:].split("=", 1)
                meta[key.strip()] = float(value)
            elif line.strip():
                body.append(line)
        degree = int(body[0])
        coeffs = np.array([float(v) for v in body[1:]])
        if coeffs.size != degree + 1:
            raise QlsaError(f"{path}: expected {degree + 1} coefficients, found {coeffs.size}")
        coeffs.setflags(write=False)
        return cls(meta.get("kappa", math.nan), meta.get("delta_poly", math.nan), degree, coeffs,
                   meta.get("certified_error", math.nan))


def certification_grid(kappa: float, n: int = GRID_POINTS) -> np.ndarray:
    """Chebyshev extreme points of ``[1/kappa, 1]``, endpoints included."""
    lo = 1.0 / kappa
    return (1 + lo) / 2 + (1 - lo) / 2 * np.cos(np.pi * np.arange(n) / (n - 1))


def _odd(coeffs: np.ndarray) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=np.float64).copy()
    coeffs[0::2] = 0.0
    return coeffs


def _fit_lstsq(kappa: float, degree: int) -> np.ndarray:
    n_odd = (degree + 1) // 2
    m = 2 * (degree + 1) + 16
    t = np.cos(np.pi * (np.arange(m) + 0.5) / m)
    x = (1 + 1 / kappa) / 2 + (1 - 1 / kappa) / 2 * t
    V = np.cos(np.outer(np.arccos(x), np.arange(1, degree + 1, 2)))
    sol = scipy.linalg.lstsq(V, 1.0 / x, lapack_driver="gelsd", check_finite=False)[0]
    coeffs = np.zeros(degree + 1)
    coeffs[1::2] = sol[:n_odd]
    return coeffs


def _fit_smoothed(kappa: float, degree: int, delta: float) -> np.ndarray:
    # exp(-(s/kappa)^2) <= delta / (2 kappa) keeps the surrogate within delta/2 of 1/x
    s = kappa * math.sqrt(math.log(2 * kappa / delta))
    n = degree + 1
    x = np.cos(np.pi * (np.arange(n) + 0.5) / n)
    g = -np.expm1(-(s * x) ** 2) / x
    coeffs = scipy.fft.dct(g, type=2) / n
    coeffs[0] /= 2
    return _odd(coeffs)


def _fit(kappa, degree, delta):
    if degree <= LSTSQ_MAX_DEGREE:
        return _fit_lstsq(kappa, degree)
    return _fit_smoothed(kappa, degree, delta)


@functools.lru_cache(maxsize=64)
def build_inverse_poly(kappa: float, delta_poly: float, degree_cap: int = DEGREE_CAP,
                       grid_points: int = GRID_POINTS) -> InverseApproximant:
    """Smallest odd-degree certified approximant of ``1/x`` on ``1/kappa <= |x| <= 1``.

    The search starts at ``ceil(kappa ln(1/delta))``, doubles until the grid
    error is at most ``delta_poly``, then bisects back down over odd degrees.
    Results are cached; the returned object is immutable.
    """
    if not kappa >= 1:
        raise QlsaError(f"kappa must be >= 1, got {kappa}")
    if not 0 < delta_poly < 1:
        raise QlsaError(f"delta_poly must lie in (0, 1), got {delta_poly}")
    if grid_points < 2:
        raise QlsaError("certification grid needs at least 2 points")
    grid = certification_grid(kappa, grid_points)
    target = 1.0 / grid

    tried = {}

    def error(deg):
        if deg not in tried:
            coeffs = _fit(kappa, deg, delta_poly)
            err = float(np.max(np.abs(kernels.chebyshev_eval(coeffs, grid) - target)))
            tried[deg] = (err, coeffs)
        return tried[deg][0]

    cap = degree_cap if degree_cap % 2 else degree_cap - 1
    start = min(cap, max(1, math.ceil(kappa * math.log(1 / delta_poly))) | 1)
    if error(start) <= delta_poly:
        hi, lo = start, start
        while lo > 1:
            lo = max(1, (lo // 2) | 1)
            if error(lo) > delta_poly:
                break
            hi = lo
        if error(lo) <= delta_poly:
            hi = lo
    else:
        lo, hi = start, start
        while error(hi) > delta_poly:
            if hi == cap:
                raise DegreeCapError(cap, error(cap))
            lo, hi = hi, min(cap, 2 * hi + 1)
    # invariant: error(lo) > delta_poly >= error(hi), unless lo == hi
    while hi - lo > 2:
        mid = ((lo + hi) // 2) | 1
        if mid >= hi:
            mid -= 2
        if error(mid) <= delta_poly:
            hi = mid
        else:
            lo = mid
    err, coeffs = tried[hi]
    coeffs = _odd(coeffs)
    coeffs.setflags(write=False)
    return InverseApproximant(float(kappa), float(delta_poly), hi, coeffs, err)


@dataclass(frozen=True, eq=False)
class QlsaResult:
    """Normalized solution state plus bookkeeping.

    ``solution_norm`` estimates ``||M^{-1} y||`` for the unnormalized system;
    ``leakage`` is the norm left in the first half of the dilated output.
    """

    state: StateVector
    delta_requested: float
    degree_used: int
    method: str
    solution_norm: float
    leakage: float = 0.0


def apply_qlsa(sys: BlockSystem, delta: float, degree_cap: int = DEGREE_CAP) -> QlsaResult:
    """Emulated solve with ``||result - exact normalized solution|| <= delta``.

    The polynomial error is set to ``delta / 8``: on ``H = dilation / 2`` the
    unnormalized error is at most ``delta/8 * ||y||`` while the exact output has
    norm at least ``||y||``, and normalizing at most doubles a relative error.
    """
    if not 0 < delta < 1:
        raise QlsaError(f"delta must lie in (0, 1), got {delta}")
    norm_y = float(np.linalg.norm(sys.y))
    if norm_y == 0:
        raise QlsaError("right-hand side is zero; there is no state to prepare")
    approx = build_inverse_poly(float(2 * sys.n_blocks), delta / 8, degree_cap)
    dil = hermitian_dilation(sys.M)
    n = sys.M.n_rows
    v = np.zeros(2 * n)
    v[:n] = sys.y / norm_y
    out = kernels.chebyshev_matvec(dil.row_offsets, dil.col_indices, dil.values,
                                   approx.coefficients, v, 0.5)
    top, bottom = out[:n], out[n:]
    nb = float(np.linalg.norm(bottom))
    if nb == 0:
        raise QlsaError("polynomial output vanished")
    state = StateVector(bottom / nb, sys.N)
    return QlsaResult(state, delta, approx.degree, "poly_emulation", nb * norm_y / 2,
                      float(np.linalg.norm(top)))


def exact_oracle(sys: BlockSystem, cap: int = DENSE_CAP) -> QlsaResult:
    """Normalized dense solve; the ground truth every other channel is measured against."""
    x = dense_solve(sys.M, sys.y, cap)
    norm = float(np.linalg.norm(x))
    if norm == 0:
        raise QlsaError("right-hand side is zero; there is no state to prepare")
    return QlsaResult(StateVector(x / norm, sys.N), 0.0, 0, "exact_oracle", norm)


def _orthogonal_unit(psi_block: np.ndarray, rng=None) -> np.ndarray | None:
    """A unit vector orthogonal to the unit vector ``psi_block`` (None in dimension 1)."""
    n = psi_block.size
    if n < 2:
        return None
    if rng is None:
        probe = np.zeros(n)
        probe[int(np.argmin(np.abs(psi_block)))] = 1.0
    else:
        probe = rng.standard_normal(n)
    u = probe - (probe @ psi_block) * psi_block
    return u / np.linalg.norm(u)


def perturb_state(psi: np.ndarray, block_size: int, delta: float, target_block: int,
                  objective: str = "collapse", good_blocks=None, rng=None) -> np.ndarray:
    """Unit vector at distance exactly ``delta`` from unit ``psi``.

    ``collapse`` picks the direction that maximizes the error of the
    renormalized ``target_block`` after measurement; ``probability`` moves
    weight out of ``good_blocks``; ``random`` draws a uniform direction from
    ``rng``.
    """
    psi = np.asarray(psi, dtype=np.float64)
    if not 0 <= delta <= 2:
        raise QlsaError("distance between unit vectors lies in [0, 2]")
    theta = 2 * math.asin(delta / 2)
    blocks = psi.reshape(-1, block_size)

    if objective == "random":
        if rng is None:
            raise QlsaError("random perturbation needs an rng")
        w = rng.standard_normal(psi.size)
    elif objective == "probability":
        mask = np.zeros(blocks.shape, dtype=bool)
        mask[list(good_blocks)] = True
        good = np.where(mask.ravel(), psi, 0.0)
        bad = psi - good
        g, b = np.linalg.norm(good), np.linalg.norm(bad)
        if g == 0 or b == 0:
            w = -psi if g else psi
            w = _orthogonal_unit(psi) if b == 0 and g else w
        else:
            w = -b * good / g + g * bad / b
    elif objective == "collapse":
        alpha = float(np.linalg.norm(blocks[target_block]))
        if alpha == 0:
            raise QlsaError("target block carries no amplitude")
        psi_j = blocks[target_block] / alpha
        rest = psi.copy()
        rest[target_block * block_size:(target_block + 1) * block_size] = 0.0
        rest_norm = float(np.linalg.norm(rest))
        u_block = _orthogonal_unit(psi_j)
        span = math.sqrt(max(0.0, 1 - alpha ** 2))

        def parts(t):
            r = -alpha * t / span if span > 0 else 0.0
            s2 = 1 - t * t - r * r
            s = math.sqrt(max(0.0, s2)) if u_block is not None else 0.0
            return s, r

        def angle(t):
            s, _ = parts(t)
            return -math.atan2(s * math.sin(theta), alpha * math.cos(theta) + t * math.sin(theta))

        if u_block is None or span == 0:
            t = -span
        else:
            t = scipy.optimize.minimize_scalar(angle, bounds=(-span, span), method="bounded",
                                               options={"xatol": 1e-14}).x
        s, r = parts(t)
        w = np.zeros_like(psi)
        sl = slice(target_block * block_size, (target_block + 1) * block_size)
        w[sl] = t * psi_j + (s * u_block if u_block is not None else 0.0)
        if rest_norm > 0:
            w += r * rest / rest_norm
    else:
        raise QlsaError(f"unknown perturbation objective {objective!r}")

    w = w - (w @ psi) * psi
    wn = np.linalg.norm(w)
    if wn == 0:
        return psi.copy()
    phi = math.cos(theta) * psi + math.sin(theta) * (w / wn)
    return phi / np.linalg.norm(phi)


def exact_plus_noise(sys: BlockSystem, delta: float, target_block: int | None = None,
                     objective: str = "collapse", rng=None) -> QlsaResult:
    """Exact solution pushed a distance of exactly ``delta`` in an adversarial direction."""
    exact = exact_oracle(sys)
    target = sys.l if target_block is None else target_block
    phi = perturb_state(exact.state.amplitudes, sys.N, delta, target, objective,
                        good_blocks=sys.success_blocks, rng=rng)
    return QlsaResult(StateVector(phi, sys.N), delta, 0, "exact_plus_noise", exact.solution_norm)
