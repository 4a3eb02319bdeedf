"""Index-register measurement and the restart-until-success driver.

Measurement of ``sum_i |i>|x_i>`` in the index register returns ``j`` with
probability ``||x_j||^2`` and leaves the data register in ``x_j / ||x_j||``.
Probabilities are computed exactly; only the draw of ``j`` is random.

Random numbers come from numpy's ``Philox`` (4x64, 10 rounds) counter-based
bit generator seeded with a non-negative integer, so a seed fixes every draw on
every platform. A draw takes one ``Generator.random()`` double ``u`` and returns
the first index whose cumulative probability exceeds ``u``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import qlsa, theory
from .blocksys import BlockSystem, build_block_system
from .iterate import Scheme, run_iterations
from .linalg import DENSE_CAP, SparseMatrix
from .state import NORM_TOL, StateError, StateVector

__all__ = ["StateVector", "MeasurementDistribution", "QrlsRunResult", "AttemptRecord",
           "AttemptCapError", "make_rng", "register_probabilities", "sample_index",
           "sample_indices", "sample_and_collapse", "run_qrls", "reference_solution"]

POLICIES = ("discard", "restart_with_iterate")
METHODS = ("poly_emulation", "exact_oracle", "exact_plus_noise")


class MeasurementError(ValueError):
    pass


class AttemptCapError(RuntimeError):
    def __init__(self, cap, log):
        super().__init__(f"no success within {cap} attempts; outcomes {[a.outcome_index for a in log]}")
        self.cap = cap
        self.log = log


def make_rng(seed) -> np.random.Generator:
    """``Generator(Philox(seed))``; an existing Generator is passed through."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or int(seed) < 0:
        raise MeasurementError(f"seed must be a non-negative integer, got {seed!r}")
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass(frozen=True, eq=False)
class MeasurementDistribution:
    probabilities: np.ndarray
    l: int
    c: int

    @property
    def success_set(self) -> range:
        return range(self.l, self.l + self.c + 1)

    @property
    def p_success(self) -> float:
        return float(self.probabilities[self.l:self.l + self.c + 1].sum())

    def is_success(self, j: int) -> bool:
        return self.l <= j <= self.l + self.c


def register_probabilities(x: StateVector, l: int, c: int) -> MeasurementDistribution:
    if x.n_blocks != l + c + 1:
        raise MeasurementError(f"state has {x.n_blocks} blocks, expected l + c + 1 = {l + c + 1}")
    p = x.block_norms() ** 2
    total = p.sum()
    if abs(total - 1.0) > NORM_TOL:
        raise StateError(f"probabilities sum to {total!r}")
    p = p / total
    p.setflags(write=False)
    return MeasurementDistribution(p, l, c)


def _last_nonzero(dist: MeasurementDistribution) -> int:
    # rounding in the cumulative sum can push u past the last positive entry
    return int(np.flatnonzero(dist.probabilities)[-1])


def sample_index(dist: MeasurementDistribution, rng: np.random.Generator) -> int:
    cdf = np.cumsum(dist.probabilities)
    u = rng.random() * cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), _last_nonzero(dist)))


def sample_indices(dist: MeasurementDistribution, rng: np.random.Generator, size: int) -> np.ndarray:
    """Vectorized :func:`sample_index`; the same stream of ``u`` values."""
    cdf = np.cumsum(dist.probabilities)
    j = np.searchsorted(cdf, rng.random(size) * cdf[-1], side="right")
    return np.minimum(j, _last_nonzero(dist))


@dataclass(frozen=True)
class AttemptRecord:
    attempt: int
    outcome_index: int
    success: bool
    p_success: float
    delta: float
    norm_x_in: float

    CSV_HEADER = "attempt,outcome_index,success,p_success,delta,norm_x_in"

    def to_csv_row(self) -> str:
        return (f"{self.attempt},{self.outcome_index},{int(self.success)},"
                f"{self.p_success:.16e},{self.delta:.16e},{self.norm_x_in:.16e}")


@dataclass(frozen=True, eq=False)
class QrlsRunResult:
    outcome_index: int
    success: bool
    collapsed: np.ndarray
    attempts: int
    discrepancy_vs_classical: float
    seed: int | None
    p_success: float = math.nan
    delta_used: float = math.nan
    degree_used: int = 0
    attempt_log: tuple[AttemptRecord, ...] = field(default=())

    CSV_HEADER = "outcome_index,success,attempts,discrepancy_vs_classical,p_success,delta_used,degree_used,seed"

    def to_csv_row(self) -> str:
        return (f"{self.outcome_index},{int(self.success)},{self.attempts},"
                f"{self.discrepancy_vs_classical:.16e},{self.p_success:.16e},"
                f"{self.delta_used:.16e},{self.degree_used},{self.seed}")


def sample_and_collapse(x: StateVector, dist: MeasurementDistribution, rng_seed) -> QrlsRunResult:
    """One measurement: draw ``j``, return block ``j`` renormalized."""
    rng = make_rng(rng_seed)
    j = sample_index(dist, rng)
    block = x.block(j)
    collapsed = block / np.linalg.norm(block)
    seed = None if isinstance(rng_seed, np.random.Generator) else int(rng_seed)
    return QrlsRunResult(j, dist.is_success(j), collapsed, 1, math.nan, seed, dist.p_success)


def reference_solution(A: SparseMatrix, b, cap: int = DENSE_CAP) -> np.ndarray:
    """Minimum-norm least-squares solution of ``A x = b`` (dense, desk scale)."""
    import scipy.linalg

    return scipy.linalg.lstsq(A.to_dense(cap), np.asarray(b, dtype=np.float64))[0]


def _delta_for(eps, l, x_in, x_tilde):
    """Solve precision for a run from ``x_in`` and the relative guess error it implies."""
    norm_xt = float(np.linalg.norm(x_tilde))
    if not np.any(x_in) or norm_xt == 0:
        return theory.delta_for_epsilon(eps, l), 0.0
    r = float(np.linalg.norm(x_tilde - x_in)) / norm_xt
    if eps < r < 1:
        return theory.delta_for_epsilon_with_guess(r, eps, l, 1.0), r
    # guess already within eps, or too far for the guess bound: fall back to the zero-guess rule
    return theory.delta_for_epsilon(eps, l), r


def _solve(sys: BlockSystem, method: str, delta: float) -> qlsa.QlsaResult:
    if method == "poly_emulation":
        return qlsa.apply_qlsa(sys, delta)
    if method == "exact_oracle":
        return qlsa.exact_oracle(sys)
    if method == "exact_plus_noise":
        return qlsa.exact_plus_noise(sys, delta)
    raise MeasurementError(f"unknown method {method!r}; choose from {METHODS}")


def run_qrls(A: SparseMatrix, b, x_in, scheme: Scheme, l: int, eps: float = 0.5,
             policy: str = "discard", rng_seed: int = 0, method: str = "poly_emulation",
             delta: float | None = None, max_attempts: int = 64, c: int | None = None
             ) -> QrlsRunResult:
    """Prepare, measure, and repeat until the index lands in ``[l, l + c]``.

    ``discard`` reruns from the original ``x_in``; ``restart_with_iterate``
    restarts from the (rescaled) iterate that was measured. ``delta`` overrides
    the precision rule. The discrepancy is the distance between the collapsed
    state and the normalized classical iterate ``x_l`` started from the same
    ``x_in`` as the successful attempt.
    """
    if policy not in POLICIES:
        raise MeasurementError(f"unknown policy {policy!r}; choose from {POLICIES}")
    if method not in METHODS:
        raise MeasurementError(f"unknown method {method!r}; choose from {METHODS}")
    if max_attempts < 1:
        raise MeasurementError("max_attempts must be at least 1")
    c = l - 1 if c is None else c
    b = np.asarray(b, dtype=np.float64)
    x_cur = np.asarray(x_in, dtype=np.float64).copy()
    rng = make_rng(rng_seed)
    x_tilde = reference_solution(A, b) if delta is None else None

    log = []
    cache_key, cached = None, None
    for attempt in range(1, max_attempts + 1):
        d = delta if delta is not None else _delta_for(eps, l, x_cur, x_tilde)[0]
        key = (x_cur.tobytes(), d)
        if key != cache_key:
            sys = build_block_system(A, b, x_cur, scheme, l, c)
            cached = (sys, _solve(sys, method, d))
            cache_key = key
        sys, res = cached
        dist = register_probabilities(res.state, l, c)
        j = sample_index(dist, rng)
        ok = dist.is_success(j)
        log.append(AttemptRecord(attempt, j, ok, dist.p_success, d, float(np.linalg.norm(x_cur))))
        block = res.state.block(j)
        collapsed = block / np.linalg.norm(block)
        if ok:
            classical = run_iterations(A, b, x_cur, scheme, l, store_iterates=False).final
            cn = np.linalg.norm(classical)
            disc = float(np.linalg.norm(collapsed - classical / cn)) if cn > 0 else math.nan
            return QrlsRunResult(j, True, collapsed, attempt, disc,
                                 None if isinstance(rng_seed, np.random.Generator) else int(rng_seed),
                                 dist.p_success, d, res.degree_used, tuple(log))
        if policy == "restart_with_iterate":
            x_cur = collapsed * res.solution_norm * math.sqrt(dist.probabilities[j])
    raise AttemptCapError(max_attempts, log)
