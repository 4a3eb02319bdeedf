"""Closed-form bounds on success probability and precision propagation.

Notation: ``l`` relaxation steps, ``c`` copies, ``eps`` the target precision
of the collapsed iterate, ``delta`` the precision of the linear-system solve,
``alpha`` the amplitude (block norm) of the block that gets measured, and
``r = eps1 / ||x_tilde||`` the relative error of an initial guess.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class TheoryError(ValueError):
    """A bound was requested outside the hypotheses it is valid under."""


def _guess_ratio(eps1: float, norm_x_tilde: float) -> float:
    if norm_x_tilde <= 0:
        raise TheoryError("||x_tilde|| must be positive")
    if eps1 < 0 or eps1 > norm_x_tilde:
        raise TheoryError(f"need 0 <= eps1 <= ||x_tilde||, got eps1={eps1}, ||x_tilde||={norm_x_tilde}")
    return eps1 / norm_x_tilde


def _guess_factor(r: float) -> float:
    return (1 - r) / (1 + r)


def success_lower_bound(l: int, c: int) -> float:
    """``(c+1) / (l+c+1)``: the copies alone carry this much of the squared norm."""
    if l < 1 or c < 0:
        raise TheoryError(f"need l >= 1 and c >= 0, got l={l}, c={c}")
    return (c + 1) / (l + c + 1)


def success_lower_bound_with_guess(eps1: float, norm_x_tilde: float) -> float:
    """``((1 - r)/(1 + r))^2 / 2`` for an initial guess at relative distance ``r``."""
    return 0.5 * _guess_factor(_guess_ratio(eps1, norm_x_tilde)) ** 2


def worst_case_amplitude(l: int) -> float:
    """``1/sqrt(2l)``: lower bound on each success-block amplitude when ``c = l - 1``."""
    if l < 1:
        raise TheoryError("l must be at least 1")
    return 1.0 / math.sqrt(2 * l)


def delta_for_epsilon(eps: float, l: int) -> float:
    """Solve precision ``eps / (2 sqrt(2l))`` for a zero initial guess."""
    if not 0 < eps < 1:
        raise TheoryError(f"eps must lie in (0, 1), got {eps}")
    if l < 1:
        raise TheoryError("l must be at least 1")
    return eps / (2 * math.sqrt(2 * l))


def delta_for_epsilon_with_guess(eps1: float, eps2: float, l: int, norm_x_tilde: float) -> float:
    """``eps2 / (2 sqrt(2l)) * (1 - r)/(1 + r)`` for an initial guess at distance ``eps1``.

    The ordering ``eps2 < eps1`` (the run must improve on the guess) is only
    enforced for ``eps1 > 0``, so the exact-guess limit is reachable.
    """
    r = _guess_ratio(eps1, norm_x_tilde)
    if not 0 < eps2 < 1:
        raise TheoryError(f"eps2 must lie in (0, 1), got {eps2}")
    if eps1 > 0 and not eps2 < eps1:
        raise TheoryError(f"need eps2 < eps1, got eps2={eps2}, eps1={eps1}")
    return delta_for_epsilon(eps2, l) * _guess_factor(r)


def post_measurement_error_bound(alpha: float, delta: float) -> float:
    """``2 delta / (alpha - delta)``: distance between renormalized blocks of states ``delta`` apart."""
    if not 0 <= delta < alpha <= 1 + 1e-12:
        raise TheoryError(f"need 0 <= delta < alpha <= 1, got alpha={alpha}, delta={delta}")
    return 2 * delta / (alpha - delta)


def amplitude_after_error(alpha: float, delta: float) -> float:
    """``alpha - delta``: a block of norm ``alpha`` keeps at least this norm after a ``delta`` perturbation."""
    if not 0 <= delta < alpha:
        raise TheoryError(f"need 0 <= delta < alpha, got alpha={alpha}, delta={delta}")
    return alpha - delta


def p_prime_bound(eps: float) -> float:
    """``(1 - eps)/2``: success probability once the solve carries error ``delta_for_epsilon(eps, l)``."""
    if not 0 <= eps < 1:
        raise TheoryError(f"eps must lie in [0, 1), got {eps}")
    return (1 - eps) / 2


def p_prime_bound_with_guess(eps1: float, eps2: float, norm_x_tilde: float) -> float:
    r = _guess_ratio(eps1, norm_x_tilde)
    return p_prime_bound(eps2) * _guess_factor(r) ** 2


@dataclass(frozen=True)
class TheoryInputs:
    """Everything the bounds depend on, for tabulating them next to measurements."""

    l: int
    c: int
    eps: float
    eps1: float = 0.0
    norm_x_tilde: float = 1.0
    alpha: float | None = None
    delta: float | None = None

    def __post_init__(self):
        if self.l < 1 or self.c < 0:
            raise TheoryError(f"need l >= 1 and c >= 0, got l={self.l}, c={self.c}")

    @property
    def has_guess(self) -> bool:
        return self.eps1 > 0

    def delta_used(self) -> float:
        if self.delta is not None:
            return self.delta
        if self.has_guess:
            return delta_for_epsilon_with_guess(self.eps1, self.eps, self.l, self.norm_x_tilde)
        return delta_for_epsilon(self.eps, self.l)

    def report(self) -> dict[str, float]:
        """Bound values keyed by column name; ``nan`` where a hypothesis fails."""
        alpha = self.alpha if self.alpha is not None else worst_case_amplitude(self.l)
        delta = self.delta_used()
        out = {"success_bound": success_lower_bound(self.l, self.c),
               "alpha": alpha,
               "alpha_worst_case": worst_case_amplitude(self.l),
               "delta": delta}
        if self.has_guess:
            out["success_bound_guess"] = success_lower_bound_with_guess(self.eps1, self.norm_x_tilde)
            out["p_prime_bound"] = p_prime_bound_with_guess(self.eps1, self.eps, self.norm_x_tilde)
        else:
            out["p_prime_bound"] = p_prime_bound(self.eps)
        out["post_measurement_bound"] = (post_measurement_error_bound(alpha, delta)
                                         if delta < alpha else math.nan)
        out["amplitude_bound"] = alpha - delta if delta < alpha else math.nan
        return out


@dataclass(frozen=True)
class PairSample:
    """Renormalized-block errors for random unit-vector pairs ``||psi - phi|| = delta``."""

    alpha: np.ndarray
    beta: np.ndarray
    delta: np.ndarray
    error: np.ndarray

    def error_bound(self) -> np.ndarray:
        return 2 * self.delta / (self.alpha - self.delta)

    def error_violations(self, rtol: float = 1e-12) -> int:
        return int(np.sum(self.error > self.error_bound() * (1 + rtol)))

    def amplitude_violations(self, atol: float = 1e-14) -> int:
        return int(np.sum(self.beta < self.alpha - self.delta - atol))


def sample_two_block_pairs(n_trials: int, block_size: int, rng, adversarial_fraction: float = 0.5
                           ) -> PairSample:
    """Random states ``psi = [psi0; psi1]`` and ``phi`` at distance ``delta < ||psi0||``.

    A share ``adversarial_fraction`` of the trials perturbs along the direction
    that maximizes the error of the renormalized first block; the rest use a
    uniformly random direction.
    """
    from .qlsa import perturb_state

    n = 2 * block_size
    alpha = np.empty(n_trials)
    beta = np.empty(n_trials)
    delta = np.empty(n_trials)
    error = np.empty(n_trials)
    for t in range(n_trials):
        psi = rng.standard_normal(n)
        psi /= np.linalg.norm(psi)
        a = float(np.linalg.norm(psi[:block_size]))
        d = a * rng.uniform(0.0, 1.0)
        if rng.random() < adversarial_fraction:
            phi = perturb_state(psi, block_size, d, 0, "collapse")
        else:
            phi = perturb_state(psi, block_size, d, 0, "random", rng=rng)
        b = float(np.linalg.norm(phi[:block_size]))
        alpha[t], beta[t], delta[t] = a, b, d
        error[t] = np.linalg.norm(phi[:block_size] / b - psi[:block_size] / a)
    return PairSample(alpha, beta, delta, error)
