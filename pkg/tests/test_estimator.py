import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import norm

from opinionlab.core import DebateSpec, HierarchySpec, RngSeed, Rule
from opinionlab.debate import hitting_probabilities
from opinionlab.estimator import (
    RunawayError,
    Trend,
    elect_batch,
    estimate_hierarchy_win,
    estimate_win_probability,
    run_striped,
    simulate_debate,
    trend_test,
    wilson_interval,
)
from opinionlab.hierarchy import winning_probability


def wilson_by_quadratic(k, n, level):
    """Roots in p of (phat - p)^2 = z^2 p (1 - p) / n."""
    z = norm.ppf(0.5 + level / 2)
    phat = k / n
    a = 1 + z * z / n
    b = -(2 * phat + z * z / n)
    c = phat * phat
    roots = np.roots([a, b, c]).real
    return max(0.0, roots.min()), min(1.0, roots.max())


@given(st.integers(1, 5000), st.data(), st.sampled_from([0.9, 0.95, 0.99]))
def test_wilson_against_quadratic_oracle(n, data, level):
    k = data.draw(st.integers(0, n))
    lo, hi = wilson_interval(k, n, level)
    olo, ohi = wilson_by_quadratic(k, n, level)
    assert lo == pytest.approx(olo, abs=1e-9)
    assert hi == pytest.approx(ohi, abs=1e-9)
    assert 0 <= lo <= k / n <= hi <= 1


def test_wilson_rejects_empty_sample():
    with pytest.raises(ValueError):
        wilson_interval(0, 0)


# -- debate estimates --------------------------------------------------------------


def test_proportional_interval_contains_point_four():
    rep = estimate_win_probability(DebateSpec(10, 3, Rule.PROPORTIONAL), 4, 100_000, RngSeed(11))
    assert rep.covers(0.4)
    assert rep.lo <= rep.estimate <= rep.hi
    assert rep.replicas == 100_000 and rep.level == 0.99


def test_majority_interval_contains_exact_value():
    spec = DebateSpec(6, 3)
    exact = float(hitting_probabilities(spec)[3])
    assert estimate_win_probability(spec, 3, 100_000, RngSeed(12)).covers(exact)


def test_absorbing_starts_are_degenerate():
    spec = DebateSpec(10, 3)
    zero = estimate_win_probability(spec, 0, 50, RngSeed(0))
    assert (zero.estimate, zero.lo, zero.hi, zero.stderr) == (0.0, 0.0, 0.0, 0.0)
    one = estimate_win_probability(spec, 10, 50, RngSeed(0))
    assert (one.estimate, one.lo, one.hi) == (1.0, 1.0, 1.0)


def test_estimator_validation():
    with pytest.raises(ValueError):
        estimate_win_probability(DebateSpec(10, 3), 3, 0, RngSeed(0))
    with pytest.raises(ValueError):
        estimate_win_probability(DebateSpec(10, 3), 11, 10, RngSeed(0))


def test_simulated_chains_end_absorbed():
    finals = simulate_debate(DebateSpec(30, 4), 20, 500, RngSeed(1).generator())
    assert set(np.unique(finals)) <= {0, 30}


def test_runaway_guard_is_explicit():
    with pytest.raises(RunawayError):
        simulate_debate(DebateSpec(200, 2, Rule.PROPORTIONAL), 100, 10, RngSeed(1).generator(), max_steps=2)


def test_determinism_bit_for_bit():
    spec = DebateSpec(40, 4)
    a = estimate_win_probability(spec, 30, 20_000, RngSeed(5, 2))
    b = estimate_win_probability(spec, 30, 20_000, RngSeed(5, 2))
    assert a == b
    c = estimate_win_probability(spec, 30, 20_000, RngSeed(5, 3))
    assert c.successes != a.successes or c.seed != a.seed


def test_results_independent_of_worker_count():
    spec = DebateSpec(25, 3)
    one = estimate_win_probability(spec, 12, 30_000, RngSeed(8), workers=1)
    many = estimate_win_probability(spec, 12, 30_000, RngSeed(8), workers=4)
    assert one == many


def test_run_striped_sums_chunks():
    sizes = []
    total = run_striped(20_001, RngSeed(0), lambda n, rng: sizes.append(n) or n, chunk=8192)
    assert total == 20_001 and sizes == [8192, 8192, 3617]


# -- hierarchy estimates -----------------------------------------------------------


def test_elect_batch_matches_scalar_rule():
    bottom = np.array([[1, 1, 0, 0], [1, 1, 1, 0], [1, 0, 0, 0]], dtype=bool)
    assert list(elect_batch(bottom, 4)) == [False, True, False]


def test_hierarchy_interval_contains_exact_value():
    spec = HierarchySpec(3, 2)
    exact = float(winning_probability(spec, 4))
    assert estimate_hierarchy_win(spec, 4, 100_000, RngSeed(21)).covers(exact)


def test_hierarchy_unanimity_and_even_bias():
    assert estimate_hierarchy_win(HierarchySpec(3, 2), 9, 10, RngSeed(0)).estimate == 1.0
    rep = estimate_hierarchy_win(HierarchySpec(4, 2), 8, 100_000, RngSeed(22))
    assert rep.estimate < 0.5
    assert rep.covers(float(winning_probability(HierarchySpec(4, 2), 8)))


# -- coverage smoke test -----------------------------------------------------------

COVERAGE_CASES = [
    ("proportional N=10 x=4", lambda n, seed: estimate_win_probability(DebateSpec(10, 3, "proportional"), 4, n, seed), 0.4),
    ("majority s=3 N=9 x=4", lambda n, seed: estimate_win_probability(DebateSpec(9, 3), 4, n, seed),
     float(hitting_probabilities(DebateSpec(9, 3))[4])),
    ("majority s=4 N=12 x=8", lambda n, seed: estimate_win_probability(DebateSpec(12, 4), 8, n, seed),
     float(hitting_probabilities(DebateSpec(12, 4))[8])),
    ("hierarchy s=3 N=2 x=4", lambda n, seed: estimate_hierarchy_win(HierarchySpec(3, 2), 4, n, seed), 3 / 14),
]


@pytest.mark.parametrize("name,estimate,truth", COVERAGE_CASES, ids=[c[0] for c in COVERAGE_CASES])
def test_wilson_coverage_smoke(name, estimate, truth):
    hits = sum(estimate(400, RngSeed(1000 + trial, 7)).covers(truth) for trial in range(100))
    assert hits >= 95, f"{name}: covered {hits}/100"


# -- trend test --------------------------------------------------------------------


def test_trend_examples():
    dec = [(t, 1.0 - 0.1 * t, 1e-4) for t in range(5)]
    assert trend_test(dec) is Trend.DECREASING
    flat = [(t, 0.3, 0.01) for t in range(5)]
    assert trend_test(flat) is Trend.PLATEAU
    zig = [(0, 0.1, 0.001), (1, 0.9, 0.001), (2, 0.1, 0.001), (3, 0.9, 0.001)]
    assert trend_test(zig) is Trend.INCONCLUSIVE


def test_plateau_below_floor_is_inconclusive():
    flat = [(t, 0.03, 0.01) for t in range(3)]
    assert trend_test(flat, floor=0.05) is Trend.INCONCLUSIVE


def test_trend_needs_three_points():
    with pytest.raises(ValueError):
        trend_test([(0, 1.0, 0.1), (1, 0.5, 0.1)])


@given(st.lists(st.floats(0.0, 1.0), min_size=3, max_size=8), st.floats(1e-4, 0.2))
def test_trend_verdicts_are_exclusive_and_order_free(values, err):
    series = [(float(t), v, err) for t, v in enumerate(values)]
    verdict = trend_test(series)
    assert verdict == trend_test(list(reversed(series)))
    if verdict is Trend.DECREASING:
        assert all(a > b for a, b in zip(values, values[1:]))
    if verdict is Trend.PLATEAU:
        assert max(values) - min(values) <= 2 * math.hypot(err, err) + 1e-12
