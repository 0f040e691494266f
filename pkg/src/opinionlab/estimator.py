"""Replica-based Monte Carlo estimates with Wilson score intervals.

Replicas are striped into fixed-size chunks; chunk c draws from substream c of
the caller's RngSeed, so the merged integer win count depends only on
(seed, replicas, model) and not on how many workers ran the chunks.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from statistics import NormalDist
from typing import Callable, Sequence

import numpy as np

from .core import DebateSpec, HierarchySpec, RngSeed, Rule

DEFAULT_LEVEL = 0.99
CHUNK = 8192
MAX_STEPS = 10_000_000


class RunawayError(RuntimeError):
    """A chain failed to absorb within the diagnostic step cap."""


@dataclass(frozen=True)
class EstimateReport:
    estimate: float
    stderr: float
    lo: float
    hi: float
    replicas: int
    seed: RngSeed
    successes: int
    level: float = DEFAULT_LEVEL

    def covers(self, value: float) -> bool:
        return self.lo <= value <= self.hi

    def as_row(self) -> dict:
        return {
            "estimate": self.estimate,
            "stderr": self.stderr,
            "lo": self.lo,
            "hi": self.hi,
            "replicas": self.replicas,
            "successes": self.successes,
        }


def wilson_interval(successes: int, n: int, level: float = DEFAULT_LEVEL) -> tuple[float, float]:
    if n <= 0:
        raise ValueError("need at least one trial")
    z = NormalDist().inv_cdf(0.5 + level / 2)
    p = successes / n
    denom = 1 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == n else min(1.0, center + half)
    return lo, hi


def proportion_report(successes: int, n: int, seed: RngSeed, level: float = DEFAULT_LEVEL) -> EstimateReport:
    p = successes / n
    lo, hi = wilson_interval(successes, n, level)
    # guard the last ulp so lo <= estimate <= hi holds in floating point
    lo, hi = min(lo, p), max(hi, p)
    return EstimateReport(p, math.sqrt(p * (1 - p) / n), lo, hi, n, seed, successes, level)


def degenerate_report(value: int, n: int, seed: RngSeed, level: float = DEFAULT_LEVEL) -> EstimateReport:
    """Report for a start state whose outcome is certain (absorbing)."""
    v = float(value)
    return EstimateReport(v, 0.0, v, v, n, seed, value * n, level)


def run_striped(
    replicas: int,
    seed: RngSeed,
    batch: Callable[[int, np.random.Generator], int],
    *,
    chunk: int = CHUNK,
    workers: int = 1,
) -> int:
    """Sum of ``batch(size, rng)`` over replica chunks, one substream per chunk."""
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    sizes = [min(chunk, replicas - start) for start in range(0, replicas, chunk)]
    jobs = [(size, seed.generator(c)) for c, size in enumerate(sizes)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return sum(pool.map(lambda job: batch(*job), jobs))
    return sum(batch(size, rng) for size, rng in jobs)


def simulate_debate(
    spec: DebateSpec, x0: int, n: int, rng: np.random.Generator, *, max_steps: int = MAX_STEPS
) -> np.ndarray:
    """Run n independent debate chains from x0 to absorption; final states returned."""
    N, s = spec.N, spec.s
    x = np.full(n, x0, dtype=np.int64)
    active = np.flatnonzero((x > 0) & (x < N))
    steps = 0
    while active.size:
        xa = x[active]
        k = rng.hypergeometric(xa, N - xa, s)
        if spec.rule is Rule.MAJORITY:
            up = k >= spec.s_prime
        else:
            up = rng.random(active.size) < k / s
        xa = np.where(up, xa + (s - k), xa - k)
        x[active] = xa
        active = active[(xa > 0) & (xa < N)]
        steps += 1
        if steps > max_steps:
            raise RunawayError(f"{active.size} chains still running after {max_steps} steps")
    return x


def estimate_win_probability(
    spec: DebateSpec,
    x0: int,
    replicas: int,
    seed: RngSeed,
    *,
    level: float = DEFAULT_LEVEL,
    workers: int = 1,
) -> EstimateReport:
    if not 0 <= x0 <= spec.N:
        raise ValueError(f"x0 must lie in [0, {spec.N}]")
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    if x0 in (0, spec.N):
        return degenerate_report(int(x0 == spec.N), replicas, seed, level)

    def batch(n, rng):
        return int(np.count_nonzero(simulate_debate(spec, x0, n, rng) == spec.N))

    wins = run_striped(replicas, seed, batch, workers=workers)
    return proportion_report(wins, replicas, seed, level)


def elect_batch(bottom: np.ndarray, s: int) -> np.ndarray:
    """Vectorised election: rows are bottom configurations (True = PLUS)."""
    level = bottom
    while level.shape[1] > 1:
        plus = level.reshape(level.shape[0], -1, s).sum(axis=2)
        level = 2 * plus > s  # ties fall to MINUS
    return level[:, 0]


def estimate_hierarchy_win(
    spec: HierarchySpec,
    x: int,
    replicas: int,
    seed: RngSeed,
    *,
    level: float = DEFAULT_LEVEL,
    workers: int = 1,
) -> EstimateReport:
    m = spec.leaves
    if not 0 <= x <= m:
        raise ValueError(f"x must lie in [0, {m}]")
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    if x in (0, m):
        return degenerate_report(int(x == m), replicas, seed, level)

    def batch(n, rng):
        ranks = rng.random((n, m)).argsort(axis=1)
        bottom = np.zeros((n, m), dtype=bool)
        np.put_along_axis(bottom, ranks[:, :x], True, axis=1)
        return int(np.count_nonzero(elect_batch(bottom, spec.s)))

    chunk = max(1, min(CHUNK, (1 << 22) // m))
    wins = run_striped(replicas, seed, batch, chunk=chunk, workers=workers)
    return proportion_report(wins, replicas, seed, level)


class Trend(str, enum.Enum):
    DECREASING = "DECREASING"
    PLATEAU = "PLATEAU"
    INCONCLUSIVE = "INCONCLUSIVE"


def trend_test(
    series: Sequence, *, floor: float = 0.0, sigmas: float = 2.0
) -> Trend:
    """Classify a time series of (t, estimate, stderr) tuples or SeriesPoints.

    DECREASING: every step drops by more than ``sigmas`` combined stderr.
    PLATEAU: all pairs agree within ``sigmas`` combined stderr and every
    estimate sits above ``floor``.
    """
    if len(series) < 3:
        raise ValueError("trend test needs at least 3 time points")
    pts = sorted((p.t, p.estimate, p.stderr) if hasattr(p, "estimate") else tuple(p) for p in series)

    def gap(a, b):
        return sigmas * math.hypot(a[2], b[2])

    if all(a[1] - b[1] > gap(a, b) for a, b in zip(pts, pts[1:])):
        return Trend.DECREASING
    flat = all(
        abs(a[1] - b[1]) <= gap(a, b) for i, a in enumerate(pts) for b in pts[i + 1 :]
    )
    if flat and all(p[1] > floor for p in pts):
        return Trend.PLATEAU
    return Trend.INCONCLUSIVE
