from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from opinionlab.core import HierarchySpec, binomial
from opinionlab.debate import C_MINUS, C_PLUS
from opinionlab.hierarchy import winning_probabilities
from opinionlab.meanfield import (
    MajorityPolynomial,
    NoInteriorFixedPoint,
    binomial_initial_win_probability,
    evaluate_q,
    interior_fixed_point,
    iterate_q,
)


def q_by_enumeration(s, p):
    # sum over all 2^s ballots of a group: exact oracle for small s
    total = Fraction(0)
    for mask in range(2**s):
        k = bin(mask).count("1")
        if 2 * k > s:
            total += p**k * (1 - p) ** (s - k)
    return total


@pytest.mark.parametrize("s", range(2, 9))
def test_exact_q_matches_ballot_enumeration(s):
    for p in [Fraction(0), Fraction(1, 7), Fraction(1, 2), Fraction(5, 6), Fraction(1)]:
        assert evaluate_q(s, p) == q_by_enumeration(s, p)


@pytest.mark.parametrize("s", range(2, 9))
def test_coefficients_reproduce_q(s):
    coeffs = MajorityPolynomial(s).coefficients
    assert len(coeffs) == s + 1 and coeffs[-1] != 0
    for p in [Fraction(1, 3), Fraction(3, 4)]:
        assert sum(c * p**i for i, c in enumerate(coeffs)) == evaluate_q(s, p)


def test_q3_closed_form():
    p = Fraction(2, 5)
    assert evaluate_q(3, p) == 3 * p**2 - 2 * p**3
    assert binomial_initial_win_probability(HierarchySpec(3, 1), 0.3) == pytest.approx(3 * 0.09 - 2 * 0.027)


def test_examples():
    assert evaluate_q(3, Fraction(1, 2)) == Fraction(1, 2)
    assert abs(evaluate_q(4, C_PLUS) - C_PLUS) < 1e-12
    assert all(evaluate_q(s, 0.0) == 0 for s in range(2, 10))
    assert binomial_initial_win_probability(HierarchySpec(3, 3), 0.0) == 0
    assert abs(binomial_initial_win_probability(HierarchySpec(4, 2), C_PLUS) - C_PLUS) < 1e-12


def test_domain_errors():
    with pytest.raises(ValueError):
        evaluate_q(3, 1.2)
    with pytest.raises(ValueError):
        evaluate_q(3, np.array([0.1, -0.1]))
    with pytest.raises(ValueError):
        iterate_q(3, -1, 0.5)


def test_iteration_examples():
    assert iterate_q(3, 40, 0.6) > 1 - 1e-9
    assert iterate_q(4, 40, 0.7) < 1e-9
    assert all(iterate_q(s, 25, 1.0) == 1.0 for s in range(2, 8))
    assert iterate_q(5, 0, 0.37) == 0.37


@pytest.mark.parametrize("s", range(2, 11))
def test_q_is_a_nondecreasing_self_map(s):
    grid = np.linspace(0, 1, 1001)
    q = evaluate_q(s, grid)
    assert q[0] == 0 and q[-1] == pytest.approx(1)
    assert np.all(np.diff(q) >= -1e-15)
    assert np.all((q >= 0) & (q <= 1 + 1e-15))


def test_q4_factorisation():
    X = np.linspace(0, 1, 1000)
    lhs = evaluate_q(4, X) - X
    rhs = -3 * X * (X - 1) * (X - C_MINUS) * (X - C_PLUS)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_fixed_points():
    assert interior_fixed_point(3) == 0.5
    assert interior_fixed_point(4) == pytest.approx(0.7676, abs=1e-4)
    for s in (5, 6, 7, 8, 9, 10):
        v = interior_fixed_point(s)
        assert 0 < v < 1
        assert abs(evaluate_q(s, v) - v) < 1e-12


def test_odd_s_fixed_point_is_one_half():
    for s in (5, 7, 9):
        assert interior_fixed_point(s) == pytest.approx(0.5, abs=1e-12)


def test_s2_has_no_interior_fixed_point():
    with pytest.raises(NoInteriorFixedPoint):
        interior_fixed_point(2)


@given(st.integers(3, 9), st.floats(0.0, 1.0))
def test_iterates_move_away_from_interior_fixed_point(s, p):
    c = interior_fixed_point(s)
    q = evaluate_q(s, p)
    if 1e-6 < p < c - 1e-6:
        assert q < p
    elif c + 1e-6 < p < 1 - 1e-6:
        assert q > p


@pytest.mark.parametrize("N", [1, 2])
def test_fixed_count_transition_is_sharper_than_binomial_curve(N):
    s = 3
    n = s**N
    dots = [float(v) for v in winning_probabilities(HierarchySpec(s, N))]
    curve = [iterate_q(s, N, x / n) for x in range(n + 1)]
    assert max(np.diff(dots)) > max(np.diff(curve))
    assert dots != pytest.approx(curve)


def test_binomial_mixture_of_dots_equals_curve():
    # averaging the fixed-count probabilities over Binomial(s^N, p) gives Q_s^N(p)
    spec = HierarchySpec(3, 2)
    dots = winning_probabilities(spec)
    p = Fraction(2, 5)
    n = spec.leaves
    mix = sum(binomial(n, x) * p**x * (1 - p) ** (n - x) * dots[x] for x in range(n + 1))
    assert mix == iterate_q(3, 2, p)
