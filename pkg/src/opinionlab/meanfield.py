"""Majority polynomial Q_s for independent (binomial) initial opinions.

Q_s(p) = sum_{j >= s'} C(s, j) p^j (1 - p)^(s - j) is the probability that a
group of s independent voters, each PLUS with probability p, elects PLUS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import bisect

from .core import HierarchySpec, binomial, majority_threshold

FIXED_POINT_TOL = 1e-12
SCAN_DELTA = 1e-6


class NoInteriorFixedPoint(ValueError):
    pass


@dataclass(frozen=True)
class MajorityPolynomial:
    s: int

    def __post_init__(self):
        if self.s < 2:
            raise ValueError("group size must be >= 2")

    @property
    def s_prime(self) -> int:
        return majority_threshold(self.s)

    @property
    def coefficients(self) -> tuple[Fraction, ...]:
        """Power-basis coefficients, constant term first."""
        coeffs = [0] * (self.s + 1)
        for j in range(self.s_prime, self.s + 1):
            cj = binomial(self.s, j)
            # p^j (1-p)^(s-j) = sum_k C(s-j, k) (-1)^k p^(j+k)
            for k in range(self.s - j + 1):
                coeffs[j + k] += cj * binomial(self.s - j, k) * (-1) ** k
        return tuple(Fraction(c) for c in coeffs)

    def __call__(self, p):
        return evaluate_q(self.s, p)


def evaluate_q(s: int, p):
    """Q_s(p); exact when p is a Fraction, vectorised for numpy arrays."""
    if s < 2:
        raise ValueError("group size must be >= 2")
    arr = np.asarray(p) if not isinstance(p, Fraction) else None
    if arr is not None and arr.ndim > 0:
        if np.any((arr < 0) | (arr > 1)):
            raise ValueError("p must lie in [0, 1]")
    elif not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    sp = majority_threshold(s)
    if arr is not None and arr.ndim > 0:
        return sum(binomial(s, j) * arr**j * (1 - arr) ** (s - j) for j in range(sp, s + 1))
    total = sum(binomial(s, j) * p**j * (1 - p) ** (s - j) for j in range(sp, s + 1))
    return total if isinstance(p, Fraction) else float(total)


def iterate_q(s: int, N: int, p):
    """N-fold composition of Q_s (identity for N = 0)."""
    if N < 0:
        raise ValueError("N must be >= 0")
    for _ in range(N):
        p = evaluate_q(s, p)
    return p


def interior_fixed_point(s: int) -> float:
    """The unstable fixed point of Q_s inside (0, 1)."""
    if s == 3:
        return 0.5
    if s == 4:
        return (1 + math.sqrt(13)) / 6

    def f(p):
        return evaluate_q(s, p) - p

    grid = np.linspace(SCAN_DELTA, 1 - SCAN_DELTA, 2001)
    vals = evaluate_q(s, grid) - grid
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa == 0:
            return float(a)
        if fa * fb < 0:
            return float(bisect(f, a, b, xtol=FIXED_POINT_TOL * 1e-2, maxiter=200))
    raise NoInteriorFixedPoint(f"Q_{s}(p) - p has no sign change inside (0, 1)")


def binomial_initial_win_probability(spec: HierarchySpec, p: float) -> float:
    """Root win probability when each bottom node is PLUS independently with prob p."""
    return iterate_q(spec.s, spec.N, p)
