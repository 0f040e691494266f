"""Spatial public debate model (proportional rule) on a periodic lattice.

Sites of the torus (Z/LZ)^d are indexed row-major. Discussion group ``a`` is
a + {0, ..., s-1}^d, so there is one group per anchor site. Every group fires
at rate one; the superposition is simulated as a single exponential clock of
rate L^d plus a uniform anchor.

Each event carries both a uniform ``u`` (threshold construction: the group
turns PLUS iff u < fraction of PLUS in it) and a uniform site ``w`` of the
group (voice construction: the group copies the opinion at w). The same event
stream therefore drives either construction and the backward dual walk.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np
from numba import njit

from .core import Opinion, RngSeed, uniform_choice, uniform_variate

# longest event block generated at once
_BLOCK_EVENTS = 1 << 21


class UpdateRule(str, enum.Enum):
    THRESHOLD = "threshold"
    VOICE = "voice"


@dataclass(frozen=True)
class LatticeSpec:
    d: int
    L: int
    s: int
    horizon: float = 1.0

    def __post_init__(self):
        if not 1 <= self.d <= 3:
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.d}")
        if self.s < 1:
            raise ValueError("group side must be >= 1")
        if self.L <= 2 * (self.s - 1):
            raise ValueError(f"need L > 2(s-1) so groups do not wrap onto themselves")
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")

    @property
    def n_sites(self) -> int:
        return self.L**self.d

    @property
    def group_size(self) -> int:
        return self.s**self.d

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.L,) * self.d

    def site(self, coords: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(c % self.L for c in coords), self.shape))

    def coords(self, site: int) -> tuple[int, ...]:
        return tuple(int(c) for c in np.unravel_index(site, self.shape))

    def displacement(self, a: int, b: int) -> tuple[int, ...]:
        """Shortest torus vector from site a to site b (components in (-L/2, L/2])."""
        out = []
        for ca, cb in zip(self.coords(a), self.coords(b)):
            v = (cb - ca) % self.L
            out.append(v - self.L if v > self.L // 2 else v)
        return tuple(out)

    def groups(self) -> np.ndarray:
        return _group_table(self.d, self.L, self.s)

    def containing(self) -> np.ndarray:
        return _containing_table(self.d, self.L, self.s)

    def site_coords(self) -> np.ndarray:
        return _coord_table(self.d, self.L)


@lru_cache(maxsize=32)
def _coord_table(d: int, L: int) -> np.ndarray:
    grid = np.indices((L,) * d).reshape(d, -1).T
    return np.ascontiguousarray(grid, dtype=np.int64)


def _offsets(d: int, s: int) -> np.ndarray:
    return np.array(list(itertools.product(range(s), repeat=d)), dtype=np.int64).reshape(-1, d)


@lru_cache(maxsize=32)
def _group_table(d: int, L: int, s: int) -> np.ndarray:
    """groups[a] lists the sites of a + B_s."""
    coords = _coord_table(d, L)
    members = (coords[:, None, :] + _offsets(d, s)[None, :, :]) % L
    flat = np.ravel_multi_index(tuple(np.moveaxis(members, -1, 0)), (L,) * d)
    return np.ascontiguousarray(flat, dtype=np.int64)


@lru_cache(maxsize=32)
def _containing_table(d: int, L: int, s: int) -> np.ndarray:
    """containing[y] lists the anchors a with y in a + B_s."""
    coords = _coord_table(d, L)
    anchors = (coords[:, None, :] - _offsets(d, s)[None, :, :]) % L
    flat = np.ravel_multi_index(tuple(np.moveaxis(anchors, -1, 0)), (L,) * d)
    return np.ascontiguousarray(flat, dtype=np.int64)


@dataclass
class TorusState:
    spec: LatticeSpec
    opinions: np.ndarray
    clock: float = 0.0

    def __post_init__(self):
        self.opinions = np.asarray(self.opinions, dtype=np.int8).ravel()
        if self.opinions.size != self.spec.n_sites:
            raise ValueError(f"expected {self.spec.n_sites} opinions, got {self.opinions.size}")
        if not np.all(np.abs(self.opinions) == 1):
            raise ValueError("opinions must be +1 or -1")

    @classmethod
    def uniform(cls, spec: LatticeSpec, opinion: Opinion) -> "TorusState":
        return cls(spec, np.full(spec.n_sites, int(opinion), dtype=np.int8))

    @classmethod
    def bernoulli(cls, spec: LatticeSpec, theta: float, rng: np.random.Generator) -> "TorusState":
        if not 0 <= theta <= 1:
            raise ValueError("theta must lie in [0, 1]")
        plus = rng.random(spec.n_sites) < theta
        return cls(spec, np.where(plus, 1, -1).astype(np.int8))

    @classmethod
    def from_string(cls, spec: LatticeSpec, text: str) -> "TorusState":
        return cls(spec, np.array([int(Opinion.parse(c)) for c in text], dtype=np.int8))

    def to_string(self) -> str:
        return "".join("+" if o > 0 else "-" for o in self.opinions)

    def copy(self) -> "TorusState":
        return TorusState(self.spec, self.opinions.copy(), self.clock)

    def density(self) -> float:
        return float(np.mean(self.opinions == 1))

    def is_consensus(self) -> bool:
        return bool(np.all(self.opinions == self.opinions[0]))


@dataclass(frozen=True)
class EventRecord:
    time: float
    anchor: int
    u: float
    w_site: int


@dataclass
class EventStream:
    """Column storage for a run's events, in time order."""

    times: np.ndarray
    anchors: np.ndarray
    u: np.ndarray
    w_sites: np.ndarray

    def __len__(self) -> int:
        return len(self.times)

    def __iter__(self) -> Iterator[EventRecord]:
        for t, a, u, w in zip(self.times, self.anchors, self.u, self.w_sites):
            yield EventRecord(float(t), int(a), float(u), int(w))

    @classmethod
    def empty(cls) -> "EventStream":
        return cls(np.empty(0), np.empty(0, np.int64), np.empty(0), np.empty(0, np.int64))

    @classmethod
    def from_records(cls, records: Iterable[EventRecord]) -> "EventStream":
        recs = list(records)
        if not recs:
            return cls.empty()
        return cls(
            np.array([r.time for r in recs], dtype=np.float64),
            np.array([r.anchor for r in recs], dtype=np.int64),
            np.array([r.u for r in recs], dtype=np.float64),
            np.array([r.w_site for r in recs], dtype=np.int64),
        )

    @classmethod
    def concat(cls, parts: Sequence["EventStream"]) -> "EventStream":
        if not parts:
            return cls.empty()
        return cls(*(np.concatenate([getattr(p, f) for p in parts]) for f in ("times", "anchors", "u", "w_sites")))

    def until(self, t: float) -> "EventStream":
        k = int(np.searchsorted(self.times, t, side="right"))
        return EventStream(self.times[:k], self.anchors[:k], self.u[:k], self.w_sites[:k])


def schedule_next_event(state: TorusState, rng: np.random.Generator) -> EventRecord:
    spec = state.spec
    dt = rng.exponential(1.0 / spec.n_sites)
    anchor = uniform_choice(rng, spec.n_sites)
    u = uniform_variate(rng)
    w = int(spec.groups()[anchor, uniform_choice(rng, spec.group_size)])
    return EventRecord(state.clock + dt, anchor, u, w)


def generate_events(spec: LatticeSpec, rng: np.random.Generator, t0: float, t1: float) -> EventStream:
    """All events in (t0, t1], with the clock restarted at t0 (memoryless)."""
    rate = spec.n_sites
    parts = []
    t = t0
    while True:
        mean = rate * (t1 - t)
        block = int(min(_BLOCK_EVENTS, mean + 6 * math.sqrt(mean) + 16))
        times = t + np.cumsum(rng.exponential(1.0 / rate, size=block))
        k = int(np.searchsorted(times, t1, side="right"))
        n = k
        anchors = rng.integers(rate, size=n)
        u = rng.random(n)
        while np.any(u == 0.0):
            zero = u == 0.0
            u[zero] = rng.random(int(zero.sum()))
        w = spec.groups()[anchors, rng.integers(spec.group_size, size=n)]
        parts.append(EventStream(times[:k], anchors.astype(np.int64), u, w.astype(np.int64)))
        if k < block:
            break
        t = float(times[-1])
    return EventStream.concat(parts)


def _check_event(spec: LatticeSpec, ev: EventRecord) -> np.ndarray:
    row = spec.groups()[ev.anchor]
    if ev.w_site not in row:
        raise ValueError(f"w-site {ev.w_site} is not in the group anchored at {ev.anchor}")
    return row


def apply_threshold_update(state: TorusState, ev: EventRecord) -> TorusState:
    """Group turns all PLUS iff u < (PLUS fraction in the group), else all MINUS."""
    row = _check_event(state.spec, ev)
    out = state.copy()
    frac = np.count_nonzero(state.opinions[row] == 1) / state.spec.group_size
    out.opinions[row] = 1 if ev.u < frac else -1
    out.clock = ev.time
    return out


def apply_voice_update(state: TorusState, ev: EventRecord) -> TorusState:
    """Group copies the pre-update opinion held at the w-site."""
    row = _check_event(state.spec, ev)
    out = state.copy()
    out.opinions[row] = state.opinions[ev.w_site]
    out.clock = ev.time
    return out


def apply_update(state: TorusState, ev: EventRecord, rule: UpdateRule) -> TorusState:
    if UpdateRule(rule) is UpdateRule.VOICE:
        return apply_voice_update(state, ev)
    return apply_threshold_update(state, ev)


@njit(cache=True)
def _apply_events(state, groups, anchors, u, w_sites, voice):
    g = groups.shape[1]
    for e in range(anchors.shape[0]):
        a = anchors[e]
        if voice:
            val = state[w_sites[e]]
        else:
            k = 0
            for i in range(g):
                if state[groups[a, i]] == 1:
                    k += 1
            val = 1 if u[e] < k / g else -1
        for i in range(g):
            state[groups[a, i]] = val


def apply_events(state: TorusState, events: EventStream, rule: UpdateRule) -> TorusState:
    """Apply a whole event stream in place (compiled fast path)."""
    if len(events):
        _apply_events(
            state.opinions,
            state.spec.groups(),
            events.anchors,
            events.u,
            events.w_sites,
            UpdateRule(rule) is UpdateRule.VOICE,
        )
        state.clock = float(events.times[-1])
    return state


@njit(cache=True)
def _trace_back(starts, coords, L, s, anchors, w_sites):
    """Positions at time 0 of the dual walkers started from ``starts`` at the end."""
    pos = starts.copy()
    d = coords.shape[1]
    for e in range(anchors.shape[0] - 1, -1, -1):
        a = anchors[e]
        for i in range(pos.shape[0]):
            z = pos[i]
            inside = True
            for k in range(d):
                if (coords[z, k] - coords[a, k]) % L >= s:
                    inside = False
                    break
            if inside:
                pos[i] = w_sites[e]
    return pos


def dual_ancestors(spec: LatticeSpec, events: EventStream, sites: Sequence[int] | None = None) -> np.ndarray:
    """Follow each site's lineage backwards through ``events`` to time 0."""
    starts = np.arange(spec.n_sites, dtype=np.int64) if sites is None else np.asarray(sites, dtype=np.int64)
    if not len(events):
        return starts.copy()
    return _trace_back(starts, spec.site_coords(), spec.L, spec.s, events.anchors, events.w_sites)


# ---------------------------------------------------------------- observables


def density(state: TorusState) -> float:
    return state.density()


def disagreement(state: TorusState, w: Sequence[int]) -> float:
    """Fraction of sites x with opinion(x) != opinion(x + w)."""
    spec = state.spec
    if len(w) != spec.d:
        raise ValueError("displacement has the wrong dimension")
    field_ = state.opinions.reshape(spec.shape)
    shifted = np.roll(field_, shift=tuple(-int(c) for c in w), axis=tuple(range(spec.d)))
    return float(np.mean(field_ != shifted))


def unit_vector(d: int, axis: int = 0) -> tuple[int, ...]:
    return tuple(1 if k == axis else 0 for k in range(d))


@dataclass
class Trajectory:
    sample_times: list[float]
    snapshots: list[np.ndarray]
    final: TorusState
    n_events: int = 0
    consensus_time: float | None = None


def _initial_state(spec: LatticeSpec, initial, rng: np.random.Generator) -> TorusState:
    if isinstance(initial, TorusState):
        return initial.copy()
    if isinstance(initial, np.ndarray):
        return TorusState(spec, initial.copy())
    return TorusState.bernoulli(spec, float(initial), rng)


def run(
    spec: LatticeSpec,
    initial,
    rule: UpdateRule,
    rng: np.random.Generator,
    *,
    sample_times: Sequence[float] | None = None,
    stop_at_consensus: bool = False,
    keep_events: bool = False,
) -> tuple[Trajectory, EventStream | None]:
    """Simulate one replica up to the horizon.

    ``initial`` is a TorusState, an opinion array, or a density theta for
    independent Bernoulli opinions. Snapshots are taken at ``sample_times``
    (default: the horizon). Once a consensus is reached nothing can change,
    so ``stop_at_consensus`` skips the remaining events.
    """
    state = _initial_state(spec, initial, rng)
    times = sorted(float(t) for t in (sample_times if sample_times is not None else [spec.horizon]))
    if times and (times[0] < 0 or times[-1] > spec.horizon):
        raise ValueError("sample times must lie in [0, horizon]")
    snapshots = []
    kept = []
    n_events = 0
    consensus_at = 0.0 if state.is_consensus() else None
    t = 0.0
    for target in times:
        while t < target:
            if stop_at_consensus and consensus_at is not None:
                t = target
                break
            chunk_end = min(target, t + max(1.0, _BLOCK_EVENTS / spec.n_sites))
            events = generate_events(spec, rng, t, chunk_end)
            apply_events(state, events, rule)
            n_events += len(events)
            if keep_events:
                kept.append(events)
            t = chunk_end
            if consensus_at is None and state.is_consensus():
                consensus_at = t
        snapshots.append(state.opinions.copy())
    state.clock = max(t, state.clock)
    traj = Trajectory(times, snapshots, state, n_events, consensus_at)
    return traj, (EventStream.concat(kept) if keep_events else None)


@dataclass(frozen=True)
class SeriesPoint:
    t: float
    estimate: float
    stderr: float


def observable_series(
    spec: LatticeSpec,
    theta: float,
    rule: UpdateRule,
    sample_times: Sequence[float],
    replicas: int,
    seed: RngSeed,
    observable: str = "density",
    w: Sequence[int] | None = None,
) -> list[SeriesPoint]:
    """Replica mean and standard error of a torus-averaged observable over time."""
    if replicas < 2:
        raise ValueError("need at least 2 replicas for a standard error")
    if observable == "disagreement":
        w = tuple(w) if w is not None else unit_vector(spec.d)
        measure = lambda st: disagreement(st, w)  # noqa: E731
    elif observable == "density":
        measure = density
    else:
        raise ValueError(f"unknown observable {observable!r}")
    times = sorted(float(t) for t in sample_times)
    values = np.empty((replicas, len(times)))
    for r in range(replicas):
        traj, _ = run(spec, theta, rule, seed.generator(r), sample_times=times, stop_at_consensus=True)
        for i, snap in enumerate(traj.snapshots):
            values[r, i] = measure(TorusState(spec, snap))
    means = values.mean(axis=0)
    errs = values.std(axis=0, ddof=1) / math.sqrt(replicas)
    return [SeriesPoint(t, float(m), float(e)) for t, m, e in zip(times, means, errs)]


def disagreement_probability(
    spec: LatticeSpec,
    theta: float,
    w: Sequence[int],
    t: float | Sequence[float],
    replicas: int,
    seed: RngSeed,
    rule: UpdateRule = UpdateRule.THRESHOLD,
) -> list[SeriesPoint]:
    """Monte Carlo P(opinion(x) != opinion(x + w)) at time(s) t, averaged over x."""
    times = [t] if np.isscalar(t) else list(t)
    return observable_series(spec, theta, rule, times, replicas, seed, "disagreement", w)


# ------------------------------------------------------------- dual process


def dual_walk_step_kernel(spec: LatticeSpec) -> dict[tuple[int, ...], Fraction]:
    """Jump rates of one dual lineage: s^-d * prod_j (s - |w_j|), w included at 0."""
    s, d = spec.s, spec.d
    rates = {}
    for w in itertools.product(range(-(s - 1), s), repeat=d):
        rates[w] = Fraction(math.prod(s - abs(c) for c in w), s**d)
    return rates


def pair_disagreement_exact(
    spec: LatticeSpec, w: Sequence[int], times: Sequence[float], theta: float = 0.5
) -> list[float]:
    """P(opinion(x) != opinion(x + w)) at each time, from the dual pair of lineages.

    The difference of the two coalescing lineages is a Markov chain on the torus
    (absorbed at 0). Its survival probability times 2 theta (1 - theta) is the
    disagreement probability for i.i.d. Bernoulli(theta) initial opinions.
    """
    from scipy.sparse import csr_matrix
    from scipy.sparse.linalg import expm_multiply

    n, g = spec.n_sites, spec.group_size
    groups, containing = spec.groups(), spec.containing()
    coords = spec.site_coords()
    shape = spec.shape

    def sub(a, b):
        return int(np.ravel_multi_index(tuple((coords[a] - coords[b]) % spec.L), shape))

    origin = 0
    rows, cols, vals = [], [], []
    for v in range(1, n):
        out = {}
        anchors = set(containing[origin].tolist()) | set(containing[v].tolist())
        for a in anchors:
            members = groups[a]
            has0 = origin in members
            hasv = v in members
            for wsite in members:
                p1 = wsite if has0 else origin
                p2 = wsite if hasv else v
                nv = sub(p2, p1)
                if nv != v:
                    out[nv] = out.get(nv, 0.0) + 1.0 / g
        total = sum(out.values())
        for nv, rate in out.items():
            rows.append(v)
            cols.append(nv)
            vals.append(rate)
        rows.append(v)
        cols.append(v)
        vals.append(-total)
    Q = csr_matrix((vals, (rows, cols)), shape=(n, n))
    start = np.zeros(n)
    start[spec.site(w)] = 1.0
    # distribution evolves under Q^T
    times = [float(t) for t in times]
    out = []
    for t in times:
        dist = expm_multiply(Q.T * t, start) if t > 0 else start
        out.append(2 * theta * (1 - theta) * float(1.0 - dist[origin]))
    return out


@dataclass
class WalkerSet:
    """Coalescing dual walkers, labelled by their starting sites."""

    positions: dict[int, int]
    time: float = 0.0
    merges: list[tuple[float, int, int]] = field(default_factory=list)
    jumps: list[tuple[float, int, tuple[int, ...]]] = field(default_factory=list)
    _root: dict[int, int] = field(default_factory=dict, repr=False)

    def root(self, label: int) -> int:
        while self._root.get(label, label) != label:
            label = self._root[label]
        return label

    def merged(self, a: int, b: int) -> bool:
        return self.root(a) == self.root(b)

    def n_clusters(self) -> int:
        return len({self.root(lbl) for lbl in self.positions})


def run_coalescing_walks(
    spec: LatticeSpec,
    A: Iterable[int],
    duration: float,
    rng: np.random.Generator,
    *,
    record_jumps: bool = False,
    max_events: int | None = None,
    until_coalesced: bool = False,
) -> WalkerSet:
    """Simulate the dual system: every walker in a firing group moves to its w-site.

    Only groups that contain a walker can affect the walkers, so events are drawn
    from those groups alone (total rate = their number), which is exact by
    Poisson thinning.
    """
    labels = sorted(set(int(a) for a in A))
    if not labels:
        raise ValueError("A must be non-empty")
    ws = WalkerSet({lbl: lbl for lbl in labels})
    groups, containing = spec.groups(), spec.containing()
    t = 0.0
    events = 0
    while True:
        occupied = set(ws.positions.values())
        relevant = sorted(set(containing[list(occupied)].ravel().tolist()))
        t += rng.exponential(1.0 / len(relevant))
        if t > duration:
            break
        anchor = relevant[uniform_choice(rng, len(relevant))]
        members = groups[anchor]
        w = int(members[uniform_choice(rng, spec.group_size)])
        member_set = set(members.tolist())
        moved_roots = {}
        for lbl, pos in ws.positions.items():
            if pos in member_set:
                r = ws.root(lbl)
                if record_jumps and r not in moved_roots:
                    ws.jumps.append((t, r, spec.displacement(pos, w)))
                moved_roots.setdefault(r, lbl)
                ws.positions[lbl] = w
        roots = sorted(moved_roots)
        for other in roots[1:]:
            ws._root[other] = roots[0]
            ws.merges.append((t, roots[0], other))
        events += 1
        if max_events is not None and events >= max_events:
            break
        if until_coalesced and len(set(ws.positions.values())) == 1:
            break
    ws.time = min(t, duration)
    return ws


# ------------------------------------------------------------ replay format

_REPLAY_MAGIC = "# opinionlab event stream v1"


def write_event_stream(
    path: str | Path, spec: LatticeSpec, initial: TorusState, events: EventStream, t: float, **meta
) -> Path:
    """Line-oriented replay file: '#' metadata lines then 'time anchor u w' per event.

    Floats are written with repr(), which round-trips binary64 exactly.
    """
    path = Path(path)
    lines = [
        _REPLAY_MAGIC,
        f"# d={spec.d} L={spec.L} s={spec.s} horizon={spec.horizon!r} t={t!r}",
        f"# initial={initial.to_string()}",
    ]
    lines += [f"# {k}={v}" for k, v in meta.items()]
    for ev in events:
        lines.append(f"{ev.time!r} {ev.anchor} {ev.u!r} {ev.w_site}")
    path.write_text("\n".join(lines) + "\n")
    return path


def read_event_stream(path: str | Path) -> tuple[LatticeSpec, TorusState, EventStream, float, dict]:
    text = Path(path).read_text().splitlines()
    if not text or text[0] != _REPLAY_MAGIC:
        raise ValueError(f"{path} is not an event-stream file")
    meta: dict[str, str] = {}
    records = []
    for line in text[1:]:
        if line.startswith("#"):
            for item in line[1:].split():
                k, _, v = item.partition("=")
                meta[k] = v
            continue
        if not line.strip():
            continue
        t, a, u, w = line.split()
        records.append(EventRecord(float(t), int(a), float(u), int(w)))
    spec = LatticeSpec(int(meta.pop("d")), int(meta.pop("L")), int(meta.pop("s")), float(meta.pop("horizon")))
    initial = TorusState.from_string(spec, meta.pop("initial"))
    t = float(meta.pop("t"))
    return spec, initial, EventStream.from_records(records), t, meta


# ------------------------------------------------------------ verification


class DualityViolation(AssertionError):
    def __init__(self, message: str, replay: Path | None = None):
        super().__init__(message)
        self.replay = replay


@dataclass
class DualityReport:
    replicas: int
    checked: int
    violations: int = 0

    @property
    def passed(self) -> bool:
        return self.violations == 0


def duality_mismatches(
    spec: LatticeSpec, initial: TorusState, events: EventStream, final: TorusState, sites=None
) -> np.ndarray:
    """Sites x whose forward opinion at the end differs from initial(Z_t(x))."""
    sites = np.arange(spec.n_sites) if sites is None else np.asarray(sites, dtype=np.int64)
    ancestors = dual_ancestors(spec, events, sites)
    bad = final.opinions[sites] != initial.opinions[ancestors]
    return sites[bad]


def check_replica(
    spec: LatticeSpec,
    initial: TorusState,
    events: EventStream,
    final: TorusState,
    t: float,
    *,
    sites=None,
    replay_path: str | Path = "duality_failure.events",
    label: str = "",
) -> int:
    """Sample-wise duality check for one replica; on failure write a replay and raise."""
    bad = duality_mismatches(spec, initial, events, final, sites)
    if bad.size:
        path = write_event_stream(replay_path, spec, initial, events, t, replica=label or "?", sites=",".join(map(str, bad[:20])))
        raise DualityViolation(
            f"duality broken at {bad.size} site(s) (first {int(bad[0])}) in replica {label}; replay: {path}",
            path,
        )
    return len(bad) if sites is None else len(sites)


def duality_check(
    spec: LatticeSpec,
    initial,
    t: float,
    replicas: int,
    seed: RngSeed,
    *,
    sites: Sequence[int] | None = None,
    replay_path: str | Path = "duality_failure.events",
) -> DualityReport:
    """Run the voice construction forward, trace every lineage back through the
    same events and require opinion_t(x) == opinion_0(Z_t(x)) for each sample."""
    if t > spec.horizon:
        raise ValueError("t exceeds the horizon")
    checked = 0
    for r in range(replicas):
        rng = seed.generator(r)
        start = _initial_state(spec, initial, rng)
        traj, events = run(spec, start, UpdateRule.VOICE, rng, sample_times=[t], keep_events=True)
        n_sites = spec.n_sites if sites is None else len(sites)
        check_replica(spec, start, events, traj.final, t, sites=sites, replay_path=replay_path, label=str(r))
        checked += n_sites
    return DualityReport(replicas, checked)


@dataclass
class EquivalenceReport:
    replicas: int
    freq_threshold: np.ndarray
    freq_voice: np.ndarray
    z: np.ndarray
    alpha: float = 1e-3

    @property
    def max_abs_z(self) -> float:
        return float(np.max(np.abs(self.z)))

    @property
    def within_3_stderr(self) -> bool:
        return self.max_abs_z <= 3.0

    @property
    def passed(self) -> bool:
        """Two-sided test per site at level alpha, Bonferroni over the sites."""
        from statistics import NormalDist

        crit = NormalDist().inv_cdf(1 - self.alpha / (2 * len(self.z)))
        return self.max_abs_z <= crit


def _two_proportion_z(p1: np.ndarray, p2: np.ndarray, n: int) -> np.ndarray:
    se = np.sqrt(p1 * (1 - p1) / n + p2 * (1 - p2) / n)
    diff = p1 - p2
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, diff / np.where(se > 0, se, 1.0), np.where(diff == 0, 0.0, np.inf))
    return z


def one_step(
    spec: LatticeSpec,
    initial: TorusState,
    rule: UpdateRule,
    replicas: int,
    rng: np.random.Generator,
    anchor: int | None = None,
) -> np.ndarray:
    """States after a single group update, one row per replica (vectorised)."""
    groups = spec.groups()
    anchors = rng.integers(spec.n_sites, size=replicas) if anchor is None else np.full(replicas, anchor)
    rows = groups[anchors]
    if UpdateRule(rule) is UpdateRule.VOICE:
        picks = rng.integers(spec.group_size, size=replicas)
        val = initial.opinions[rows[np.arange(replicas), picks]]
    else:
        u = rng.random(replicas)
        frac = np.count_nonzero(initial.opinions[rows] == 1, axis=1) / spec.group_size
        val = np.where(u < frac, 1, -1).astype(np.int8)
    states = np.tile(initial.opinions, (replicas, 1))
    states[np.arange(replicas)[:, None], rows] = val[:, None]
    return states


def construction_equivalence_test(
    spec: LatticeSpec,
    initial: TorusState,
    replicas: int,
    seed: RngSeed,
    *,
    anchor: int | None = None,
    horizon: float | None = None,
) -> EquivalenceReport:
    """Compare per-site PLUS frequencies of the two constructions.

    With ``horizon`` None a single update is applied (at ``anchor`` or a uniform
    group); otherwise full trajectories are run to ``horizon``. The two rules use
    independent randomness (substreams 0 and 1 of the seed).
    """
    if horizon is None:
        th = one_step(spec, initial, UpdateRule.THRESHOLD, replicas, seed.generator(0), anchor)
        vo = one_step(spec, initial, UpdateRule.VOICE, replicas, seed.generator(1), anchor)
    else:
        run_spec = LatticeSpec(spec.d, spec.L, spec.s, horizon)
        th = np.empty((replicas, spec.n_sites), dtype=np.int8)
        vo = np.empty_like(th)
        for r in range(replicas):
            th[r] = run(run_spec, initial, UpdateRule.THRESHOLD, seed.generator(0, r))[0].final.opinions
            vo[r] = run(run_spec, initial, UpdateRule.VOICE, seed.generator(1, r))[0].final.opinions
    f_th = (th == 1).mean(axis=0)
    f_vo = (vo == 1).mean(axis=0)
    return EquivalenceReport(replicas, f_th, f_vo, _two_proportion_z(f_th, f_vo, replicas))
