"""Shared types, validated parameter bundles, exact combinatorics and the RNG contract."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

# Exact probabilities are plain Fractions (always reduced); counts are Python ints.
ExactProb = Fraction
BigCount = int


class ResourceBudgetError(RuntimeError):
    """A computation would exceed its configured size budget."""


class Opinion(enum.IntEnum):
    PLUS = 1
    MINUS = -1

    @property
    def symbol(self) -> str:
        return "+" if self is Opinion.PLUS else "-"

    @classmethod
    def parse(cls, ch: str) -> "Opinion":
        if ch == "+":
            return cls.PLUS
        if ch == "-":
            return cls.MINUS
        raise ValueError(f"not an opinion symbol: {ch!r}")


# the value a tied group elects
TIE_DEFAULT = Opinion.MINUS


class Rule(str, enum.Enum):
    MAJORITY = "majority"
    PROPORTIONAL = "proportional"


def majority_threshold(s: int) -> int:
    """Smallest number of plus votes that wins a group of size ``s`` outright."""
    return (s + 2) // 2  # ceil((s + 1) / 2)


def as_prob(value) -> Fraction:
    p = Fraction(value)
    if not 0 <= p <= 1:
        raise ValueError(f"probability out of [0, 1]: {p}")
    return p


def binomial(n: int, k: int) -> int:
    """Exact n-choose-k; zero when k > n."""
    if n < 0 or k < 0:
        raise ValueError("binomial arguments must be non-negative")
    return math.comb(n, k)


def multinomial(n: int, parts: Sequence[int]) -> int:
    """Exact multinomial coefficient n! / prod(part!)."""
    if any(p < 0 for p in parts):
        raise ValueError("parts must be non-negative")
    if sum(parts) != n:
        raise ValueError(f"parts {list(parts)} do not sum to {n}")
    out = 1
    remaining = n
    for p in parts:
        out *= math.comb(remaining, p)
        remaining -= p
    return out


@dataclass(frozen=True)
class HierarchySpec:
    s: int
    N: int

    def __post_init__(self):
        if self.s < 2:
            raise ValueError(f"group size must be >= 2, got {self.s}")
        if self.N < 1:
            raise ValueError(f"number of levels must be >= 1, got {self.N}")

    @property
    def s_prime(self) -> int:
        return majority_threshold(self.s)

    @property
    def leaves(self) -> int:
        return self.s**self.N

    def nodes(self, level: int) -> int:
        return self.s**level


@dataclass(frozen=True)
class DebateSpec:
    N: int
    s: int
    rule: Rule = Rule.MAJORITY

    def __post_init__(self):
        object.__setattr__(self, "rule", Rule(self.rule))
        if self.N < 2:
            raise ValueError(f"population must be >= 2, got {self.N}")
        if not 2 <= self.s <= self.N:
            raise ValueError(f"need 2 <= s <= N, got s={self.s}, N={self.N}")

    @property
    def s_prime(self) -> int:
        return majority_threshold(self.s)


_U64 = 1 << 64


@dataclass(frozen=True)
class RngSeed:
    """Reproducibility key: the pair (seed, stream_id) fixes the random sequence.

    Streams are derived through numpy's SeedSequence spawn keys and fed to PCG64,
    whose output is platform independent. ``substream`` lets a single stream be
    striped further (replica chunks) without colliding with other stream ids.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not 0 <= v < _U64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {v}")

    def generator(self, *substream: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *substream))
        return np.random.Generator(np.random.PCG64(ss))

    def with_stream(self, stream_id: int) -> "RngSeed":
        return RngSeed(self.seed, stream_id)


def uniform_variate(rng: np.random.Generator) -> float:
    """A uniform draw from the open interval (0, 1)."""
    while True:
        u = rng.random()
        if u > 0.0:
            return u


def uniform_choice(rng: np.random.Generator, k: int) -> int:
    """Unbiased integer in [0, k)."""
    if k < 1:
        raise ValueError("uniform_choice needs k >= 1")
    return int(rng.integers(k))


def format_fraction(p: Fraction) -> str:
    return f"{p.numerator}/{p.denominator}"


def parse_fraction(text: str) -> Fraction:
    return Fraction(text)


def format_decimal(p: Fraction, places: int = 12) -> str:
    """Exactly rounded fixed-point rendering of a rational (round half even)."""
    scale = 10**places
    q = round(Fraction(p) * scale)
    sign = "-" if q < 0 else ""
    q = abs(q)
    whole, frac = divmod(q, scale)
    return f"{sign}{whole}.{frac:0{places}d}"
