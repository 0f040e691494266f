"""The non-spatial public debate model as an absorbing chain on {0, ..., N}.

The state is the number of PLUS supporters. Each step picks s distinct
individuals, so the number of pluses in the group is hypergeometric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .core import DebateSpec, RngSeed, Rule, binomial
from .estimator import EstimateReport, estimate_win_probability

C_MINUS = (1 - math.sqrt(13)) / 6
C_PLUS = (1 + math.sqrt(13)) / 6


@dataclass(frozen=True)
class JumpDistribution:
    center: int
    jumps: dict[int, Fraction]

    def __post_init__(self):
        if sum(self.jumps.values()) != 1:
            raise ValueError("jump probabilities must sum to 1")

    def prob(self, j: int) -> Fraction:
        return self.jumps.get(j, Fraction(0))

    def mean(self) -> Fraction:
        return sum((j * p for j, p in self.jumps.items()), Fraction(0))


@dataclass(frozen=True)
class HittingProbabilityVector:
    spec: DebateSpec
    values: tuple[Fraction, ...]

    def __getitem__(self, x: int) -> Fraction:
        return self.values[x]

    def __len__(self) -> int:
        return len(self.values)


def group_composition(spec: DebateSpec, x: int) -> dict[int, Fraction]:
    """P(k pluses in the discussion group) for k in its support."""
    N, s = spec.N, spec.s
    total = binomial(N, s)
    return {
        k: Fraction(binomial(x, k) * binomial(N - x, s - k), total)
        for k in range(max(0, s - (N - x)), min(s, x) + 1)
    }


def jump_distribution(spec: DebateSpec, x: int) -> JumpDistribution:
    if not 0 <= x <= spec.N:
        raise ValueError(f"state {x} outside [0, {spec.N}]")
    s = spec.s
    jumps: dict[int, Fraction] = {}

    def add(j, p):
        if p:
            jumps[j] = jumps.get(j, Fraction(0)) + p

    for k, pk in group_composition(spec, x).items():
        if spec.rule is Rule.MAJORITY:
            add(s - k if k >= spec.s_prime else -k, pk)
        else:
            add(s - k, pk * Fraction(k, s))
            add(-k, pk * Fraction(s - k, s))
    return JumpDistribution(x, jumps)


def _solve_banded(rows: list[dict[int, Fraction]], rhs: list[Fraction], band: int) -> list[Fraction]:
    """Gaussian elimination without pivoting on a banded system, exact arithmetic.

    ``rows[i]`` maps column -> coefficient. The matrix is I - P restricted to the
    transient states of an absorbing chain (a nonsingular M-matrix), so every
    pivot is positive and no row exchange is needed.
    """
    n = len(rows)
    a = [dict(r) for r in rows]
    b = list(rhs)
    for k in range(n):
        piv = a[k].get(k, Fraction(0))
        if piv == 0:
            raise ZeroDivisionError(f"zero pivot at row {k}")
        for i in range(k + 1, min(k + band, n - 1) + 1):
            f = a[i].get(k)
            if not f:
                continue
            f = f / piv
            for j, v in a[k].items():
                if j >= k:
                    a[i][j] = a[i].get(j, Fraction(0)) - f * v
            a[i].pop(k, None)
            b[i] -= f * b[k]
    x = [Fraction(0)] * n
    for i in range(n - 1, -1, -1):
        acc = b[i] - sum((v * x[j] for j, v in a[i].items() if j > i), Fraction(0))
        x[i] = acc / a[i][i]
    return x


def hitting_probabilities(spec: DebateSpec) -> HittingProbabilityVector:
    """Exact P(reach N | start at x) for every x, by first-step analysis.

    p_x = sum_j P(jump j | x) p_{x+j}, p_0 = 0, p_N = 1.
    """
    N = spec.N
    interior = range(1, N)
    rows, rhs = [], []
    for x in interior:
        row: dict[int, Fraction] = {}
        b = Fraction(0)
        for j, p in jump_distribution(spec, x).jumps.items():
            y = x + j
            if y == N:
                b += p
            elif y != 0:
                row[y - 1] = row.get(y - 1, Fraction(0)) - p
        row[x - 1] = row.get(x - 1, Fraction(0)) + 1
        rows.append(row)
        rhs.append(b)
    sol = _solve_banded(rows, rhs, spec.s) if rows else []
    return HittingProbabilityVector(spec, (Fraction(0), *sol, Fraction(1)))


def closed_form_s3(N: int, x: int) -> Fraction:
    """Winning probability for groups of three under the majority rule.

    2^-(N-3) * sum_{z=0}^{x-2} C(N-3, z) on 2 <= x <= N-2, extended by
    p_0 = p_1 = 0 and p_{N-1} = p_N = 1.
    """
    if N < 4:
        raise ValueError("closed form needs N >= 4")
    if not 0 <= x <= N:
        raise ValueError(f"x must lie in [0, {N}]")
    if x <= 1:
        return Fraction(0)
    if x >= N - 1:
        return Fraction(1)
    return Fraction(sum(binomial(N - 3, z) for z in range(x - 1)), 2 ** (N - 3))


def drift_s4(c: float) -> float:
    """Large-N drift of the embedded (changing-steps-only) chain at density c, s = 4."""
    if not 0 < c < 1:
        raise ValueError("density must lie in (0, 1)")
    return 6 * (c - C_MINUS) * (c - C_PLUS) / (c * c - c + 2)


def drift_s4_finite(N: int, x: int) -> Fraction:
    """Exact expected jump of the embedded chain for s = 4 at state x."""
    if N < 4:
        raise ValueError("need N >= 4")
    if not 0 < x < N:
        raise ValueError("drift is defined on interior states only")
    q = jump_distribution(DebateSpec(N, 4, Rule.MAJORITY), x)
    q1, qm1, qm2 = q.prob(1), q.prob(-1), q.prob(-2)
    changing = q1 + qm1 + qm2
    if changing == 0:
        raise ValueError(f"no changing event possible at x={x}, N={N}")
    return (q1 - qm1 - 2 * qm2) / changing


def embedded_jump_distribution(N: int, x: int) -> JumpDistribution:
    """Jump law of the s = 4 chain conditioned on the state changing."""
    q = jump_distribution(DebateSpec(N, 4, Rule.MAJORITY), x)
    changing = {j: p for j, p in q.jumps.items() if j != 0}
    total = sum(changing.values())
    return JumpDistribution(x, {j: p / total for j, p in changing.items()})


@dataclass(frozen=True)
class ThresholdReport:
    N: int
    epsilon: float
    below: EstimateReport
    above: EstimateReport
    x_below: int
    x_above: int
    small: float
    large: float

    @property
    def below_ok(self) -> bool:
        return self.below.estimate < self.small

    @property
    def above_ok(self) -> bool:
        return self.above.estimate > self.large

    @property
    def passed(self) -> bool:
        return self.below_ok and self.above_ok


def threshold_bounds_check(
    N: int,
    epsilon: float,
    replicas: int,
    seed: RngSeed,
    *,
    x_below: int | None = None,
    x_above: int | None = None,
    small: float = 0.05,
    large: float = 0.95,
) -> ThresholdReport:
    """Monte Carlo look at the s = 4 threshold at c+.

    Estimates the winning probability at one start below (c+ - 2 eps) N and one
    above (c+ + 2 eps) N, and flags whether the first is small and the second
    close to one. The exponential rate itself is not estimated.
    """
    if N < 20:
        raise ValueError("threshold check needs N >= 20")
    if not 0 < epsilon < C_PLUS / 2:
        raise ValueError("epsilon must lie in (0, c+/2)")
    lo_edge, hi_edge = (C_PLUS - 2 * epsilon) * N, (C_PLUS + 2 * epsilon) * N
    if x_below is None:
        x_below = math.ceil(lo_edge) - 1
    if x_above is None:
        x_above = math.floor(hi_edge) + 1
    if not 0 < x_below < lo_edge:
        raise ValueError(f"x_below={x_below} is not inside (0, {lo_edge:.3f})")
    if not hi_edge < x_above <= N:
        raise ValueError(f"x_above={x_above} is not inside ({hi_edge:.3f}, {N}]")
    spec = DebateSpec(N, 4, Rule.MAJORITY)
    below = estimate_win_probability(spec, x_below, replicas, seed.with_stream(2 * seed.stream_id))
    above = estimate_win_probability(spec, x_above, replicas, seed.with_stream(2 * seed.stream_id + 1))
    return ThresholdReport(N, epsilon, below, above, x_below, x_above, small, large)
