"""Bottom-up hierarchical voting with a fixed number of plus supporters at the bottom.

Levels are numbered from the root (level 0, one node) down to the bottom
(level N, s**N nodes). A transition count ``c_l(x, z)`` is the number of
configurations at level l+1 holding z pluses that induce one fixed
configuration at level l holding x pluses.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

from .core import (
    TIE_DEFAULT,
    HierarchySpec,
    Opinion,
    ResourceBudgetError,
    binomial,
    majority_threshold,
    multinomial,
)

# s**level allowed for the composition sum at the parent level
DEFAULT_MAX_GENERAL_NODES = 64
DEFAULT_MAX_TERMS = 2_000_000
# s**N allowed for the level-by-level accumulation
DEFAULT_MAX_DP_LEAVES = 4096
# s**N allowed for exhaustive enumeration
DEFAULT_MAX_BRUTE_LEAVES = 16


@dataclass(frozen=True)
class BottomConfiguration:
    spec: HierarchySpec
    opinions: tuple[Opinion, ...]

    def __post_init__(self):
        object.__setattr__(self, "opinions", tuple(Opinion(o) for o in self.opinions))
        if len(self.opinions) != self.spec.leaves:
            raise ValueError(
                f"expected {self.spec.leaves} bottom opinions, got {len(self.opinions)}"
            )

    @classmethod
    def from_string(cls, spec: HierarchySpec, text: str) -> "BottomConfiguration":
        return cls(spec, tuple(Opinion.parse(c) for c in text))


def group_winner(group: Sequence[Opinion], s: int | None = None) -> Opinion:
    plus = sum(1 for o in group if o == Opinion.PLUS)
    s = len(group) if s is None else s
    if 2 * plus > s:
        return Opinion.PLUS
    if 2 * plus < s:
        return Opinion.MINUS
    return TIE_DEFAULT


def induce(opinions: Sequence[Opinion], s: int) -> tuple[Opinion, ...]:
    """One voting step: consecutive blocks of ``s`` each elect a representative."""
    if len(opinions) % s:
        raise ValueError("configuration length is not a multiple of s")
    return tuple(group_winner(opinions[i : i + s], s) for i in range(0, len(opinions), s))


def elect(config: BottomConfiguration) -> Opinion:
    level = config.opinions
    for _ in range(config.spec.N):
        level = induce(level, config.spec.s)
    return level[0]


def _check_parent(nodes: int, x: int) -> None:
    if not 0 <= x <= nodes:
        raise ValueError(f"parent plus count {x} outside [0, {nodes}]")


def transition_count_s3(level: int, x: int, z: int) -> int:
    """Closed sum for groups of three.

    With y = z - 2x, count = sum_{i+j=y} C(x, i) C(3^l - x, j) 3^(x - i + j), where
    i counts unanimous plus blocks and j counts minus blocks holding one plus.
    """
    m = 3**level
    _check_parent(m, x)
    y = z - 2 * x
    if not 0 <= y <= m:
        return 0
    total = 0
    for i in range(min(x, y) + 1):
        j = y - i
        total += binomial(x, i) * binomial(m - x, j) * 3 ** (x - i + j)
    return total


def transition_count_s4(level: int, x: int, z: int) -> int:
    """Closed triple sum for groups of four (a 2-2 tie elects MINUS).

    With y = z - 3x: i unanimous plus blocks, j minus blocks with two pluses
    (6 arrangements each), k minus blocks with one plus (4 arrangements each).
    """
    m = 4**level
    _check_parent(m, x)
    y = z - 3 * x
    if not 0 <= y <= 2 * m - x:
        return 0
    total = 0
    for j in range(min(m - x, y // 2) + 1):
        for i in range(min(x, y - 2 * j) + 1):
            k = y - i - 2 * j
            total += (
                binomial(x, i)
                * binomial(m - x, j)
                * binomial(m - x - j, k)
                * 4 ** (x - i + k)
                * 6**j
            )
    return total


def _compositions(total: int, parts: int):
    """All tuples of ``parts`` non-negative integers summing to ``total``."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first, *rest)


def _y_constraint(s: int, zs: Sequence[int]) -> int:
    sp = majority_threshold(s)
    if s % 2:
        return sum(j * (zs[j] + zs[sp + j]) for j in range(1, sp))
    return sum(j * (zs[j] + zs[sp + j]) for j in range(1, sp - 1)) + (sp - 1) * zs[sp - 1]


@lru_cache(maxsize=4096)
def _general_row(
    s: int, level: int, x: int, max_nodes: int, max_terms: int
) -> tuple[tuple[int, int], ...]:
    m = s**level
    if m > max_nodes:
        raise ResourceBudgetError(
            f"general transition count needs s**level = {m} nodes; budget is {max_nodes}"
        )
    _check_parent(m, x)
    sp = majority_threshold(s)
    n_terms = binomial(m - x + sp - 1, sp - 1) * binomial(x + s - sp, s - sp)
    if n_terms > max_terms:
        raise ResourceBudgetError(
            f"composition sum has {n_terms} terms; budget is {max_terms}"
        )
    block_ways = [binomial(s, j) for j in range(s + 1)]
    norm = binomial(m, x)
    y_max = (sp - 1) * (m - x) + (s - sp) * x
    acc: dict[int, Fraction] = defaultdict(Fraction)
    for low in _compositions(m - x, sp):
        for high in _compositions(x, s - sp + 1):
            zs = low + high
            y = _y_constraint(s, zs)
            assert 0 <= y <= y_max
            weight = multinomial(m, zs)
            for j, zj in enumerate(zs):
                weight *= block_ways[j] ** zj
            acc[sp * x + y] += Fraction(weight, norm)
    row = []
    for z, value in sorted(acc.items()):
        assert value.denominator == 1, "composition sum must be integral"
        row.append((z, value.numerator))
    return tuple(row)


def transition_count_general(
    spec: HierarchySpec,
    level: int,
    x: int,
    z: int,
    *,
    max_nodes: int = DEFAULT_MAX_GENERAL_NODES,
    max_terms: int = DEFAULT_MAX_TERMS,
) -> int:
    """Composition-sum transition count valid for every group size."""
    if level < 0:
        raise ValueError("level must be >= 0")
    return dict(_general_row(spec.s, level, x, max_nodes, max_terms)).get(z, 0)


@dataclass(frozen=True)
class TransitionCountTable:
    spec: HierarchySpec
    level: int
    counts: dict[tuple[int, int], int] = field(default_factory=dict)

    def __call__(self, x: int, z: int) -> int:
        return self.counts.get((x, z), 0)


def count_function(spec: HierarchySpec, **budget) -> Callable[[int, int, int], int]:
    """Pick the cheapest exact count for the group size: closed sums for 3 and 4."""
    if spec.s == 3:
        return transition_count_s3
    if spec.s == 4:
        return transition_count_s4
    return lambda level, x, z: transition_count_general(spec, level, x, z, **budget)


def _z_range(s: int, m: int, x: int) -> range:
    sp = majority_threshold(s)
    return range(sp * x, sp * x + (sp - 1) * (m - x) + (s - sp) * x + 1)


def transition_table(spec: HierarchySpec, level: int, **budget) -> TransitionCountTable:
    count = count_function(spec, **budget)
    m = spec.nodes(level)
    counts = {}
    for x in range(m + 1):
        for z in _z_range(spec.s, m, x):
            c = count(level, x, z)
            if c:
                counts[(x, z)] = c
    return TransitionCountTable(spec, level, counts)


def winning_counts(
    spec: HierarchySpec, *, max_leaves: int = DEFAULT_MAX_DP_LEAVES, **budget
) -> list[int]:
    """Number of bottom configurations with x pluses that elect PLUS, for every x.

    Evaluates the chained sum over intermediate plus counts level by level:
    weights at level l+1 are sum_x weights_l[x] * c_l(x, z), starting from a
    single PLUS root.
    """
    if spec.leaves > max_leaves:
        raise ResourceBudgetError(
            f"s**N = {spec.leaves} bottom nodes; budget is {max_leaves}"
        )
    count = count_function(spec, **budget)
    weights = {1: 1}
    for level in range(spec.N):
        m = spec.nodes(level)
        nxt: dict[int, int] = defaultdict(int)
        for x, w in weights.items():
            for z in _z_range(spec.s, m, x):
                c = count(level, x, z)
                if c:
                    nxt[z] += w * c
        weights = nxt
    return [weights.get(x, 0) for x in range(spec.leaves + 1)]


def winning_probabilities(spec: HierarchySpec, **budget) -> list[Fraction]:
    counts = winning_counts(spec, **budget)
    return [Fraction(c, binomial(spec.leaves, x)) for x, c in enumerate(counts)]


def winning_probability(spec: HierarchySpec, x: int, **budget) -> Fraction:
    if not 0 <= x <= spec.leaves:
        raise ValueError(f"x must lie in [0, {spec.leaves}]")
    return winning_probabilities(spec, **budget)[x]


def configurations_with(n: int, x: int):
    """Every configuration of n opinions with exactly x PLUS."""
    for plus_at in itertools.combinations(range(n), x):
        ops = [Opinion.MINUS] * n
        for i in plus_at:
            ops[i] = Opinion.PLUS
        yield tuple(ops)


def brute_force_win_probability(
    spec: HierarchySpec, x: int, *, max_leaves: int = DEFAULT_MAX_BRUTE_LEAVES
) -> Fraction:
    """Enumerate every bottom configuration with x pluses and run the election."""
    n = spec.leaves
    if n > max_leaves:
        raise ResourceBudgetError(f"enumeration over {n} leaves exceeds cap {max_leaves}")
    if not 0 <= x <= n:
        raise ValueError(f"x must lie in [0, {n}]")
    wins = sum(
        1
        for ops in configurations_with(n, x)
        if elect(BottomConfiguration(spec, ops)) == Opinion.PLUS
    )
    return Fraction(wins, binomial(n, x))
