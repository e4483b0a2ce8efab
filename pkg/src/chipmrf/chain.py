"""Stationary two-state Markov random field over the latent enrichment states.

The chain starts in its stationary distribution, so every position has the
same marginal enrichment probability ``q0 / (q0 + 1 - q1)`` where
``q0 = P(X[m+1]=1 | X[m]=0)`` and ``q1 = P(X[m+1]=1 | X[m]=1)``.

A :class:`LatentChain` may consist of several independent segments (one per
chromosome or per stretch between excluded regions). Pairs never straddle a
segment boundary and every segment gets its own initial-state term.
Segments are stored as 0-based half-open ``(start, end)`` bin ranges.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distributions import InvalidParameterError


@dataclass(frozen=True)
class ChainParams:
    q0: float
    q1: float

    def __post_init__(self):
        for name, v in (("q0", self.q0), ("q1", self.q1)):
            if not (0.0 < v < 1.0):
                raise InvalidParameterError(f"{name} must lie strictly inside (0, 1), got {v!r}")

    @property
    def stationary(self) -> float:
        return stationary_prob(self)

    def transition_matrix(self) -> np.ndarray:
        """Row ``i`` holds ``P(X[m+1]=j | X[m]=i)``."""
        return np.array([[1.0 - self.q0, self.q0], [1.0 - self.q1, self.q1]])


@dataclass(frozen=True)
class DeltaParams:
    """Pairwise joint probabilities ``delta_ij = P(X[m]=i, X[m+1]=j)``.

    Only ``delta11`` and ``delta00`` are free; the off-diagonal entries are
    equal by construction, which is what makes the chain stationary.
    """

    delta11: float
    delta00: float

    def __post_init__(self):
        if not (0.0 < self.delta11 < 1.0 and 0.0 < self.delta00 < 1.0):
            raise InvalidParameterError("delta11 and delta00 must lie in (0, 1)")
        if not self.delta11 + self.delta00 < 1.0:
            raise InvalidParameterError("delta11 + delta00 must be < 1 (off-diagonal mass would vanish)")

    @property
    def delta10(self) -> float:
        return (1.0 - self.delta11 - self.delta00) / 2.0

    @property
    def delta01(self) -> float:
        return self.delta10

    @property
    def delta1(self) -> float:
        return self.delta11 + self.delta10

    @property
    def delta0(self) -> float:
        return 1.0 - self.delta1


@dataclass
class LatentChain:
    states: np.ndarray
    segments: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.int8)
        if self.states.ndim != 1:
            raise ValueError("states must be one-dimensional")
        if not self.segments:
            self.segments = [(0, len(self.states))]
        _check_partition(self.segments, len(self.states))
        if np.any((self.states != 0) & (self.states != 1)):
            raise ValueError("states must be 0 or 1")

    def __len__(self) -> int:
        return len(self.states)

    @property
    def seg_starts(self) -> np.ndarray:
        return np.array([s for s, _ in self.segments], dtype=np.int64)


def _check_partition(segments, m: int) -> None:
    pos = 0
    for start, end in segments:
        if start != pos or end <= start:
            raise ValueError(f"segments must partition [0, {m}) into non-empty consecutive ranges")
        pos = end
    if pos != m:
        raise ValueError(f"segments must partition [0, {m})")


def segments_from_ids(seg_ids) -> list[tuple[int, int]]:
    """Turn a per-bin segment id vector into consecutive ``(start, end)`` ranges."""
    seg_ids = np.asarray(seg_ids)
    if len(seg_ids) == 0:
        return []
    cuts = np.flatnonzero(seg_ids[1:] != seg_ids[:-1]) + 1
    bounds = np.concatenate([[0], cuts, [len(seg_ids)]])
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]


def pair_mask(n: int, segments) -> np.ndarray:
    """Boolean mask over the ``n - 1`` adjacent pairs; False where a pair crosses segments."""
    mask = np.ones(max(n - 1, 0), dtype=bool)
    for start, _ in segments[1:]:
        mask[start - 1] = False
    return mask


@dataclass(frozen=True)
class TransitionCounts:
    n11: int
    n10: int
    n01: int
    n00: int
    first1: int = 0
    first0: int = 0

    @property
    def total(self) -> int:
        return self.n11 + self.n10 + self.n01 + self.n00

    def __add__(self, other: "TransitionCounts") -> "TransitionCounts":
        return TransitionCounts(
            self.n11 + other.n11,
            self.n10 + other.n10,
            self.n01 + other.n01,
            self.n00 + other.n00,
            self.first1 + other.first1,
            self.first0 + other.first0,
        )


def transition_counts(chain: LatentChain) -> TransitionCounts:
    x = chain.states.astype(np.int64)
    if len(x) == 0:
        raise ValueError("chain is empty")
    keep = pair_mask(len(x), chain.segments)
    codes = (2 * x[:-1] + x[1:])[keep]
    n00, n01, n10, n11 = np.bincount(codes, minlength=4)
    firsts = x[chain.seg_starts]
    first1 = int(firsts.sum())
    return TransitionCounts(int(n11), int(n10), int(n01), int(n00), first1, len(firsts) - first1)


def stationary_prob(q: ChainParams) -> float:
    return q.q0 / (q.q0 + 1.0 - q.q1)


def initial_loglik(q: ChainParams, first1: int, first0: int) -> float:
    """Log of the stationary initial-state terms over all segments."""
    denom = np.log(q.q0 + 1.0 - q.q1)
    return first1 * (np.log(q.q0) - denom) + first0 * (np.log1p(-q.q1) - denom)


def counts_loglik(q: ChainParams, n: TransitionCounts) -> float:
    """Full log-density of a chain summarised by its transition counts."""
    return (
        initial_loglik(q, n.first1, n.first0)
        + n.n11 * np.log(q.q1)
        + n.n10 * np.log1p(-q.q1)
        + n.n01 * np.log(q.q0)
        + n.n00 * np.log1p(-q.q0)
    )


def chain_logdensity(chain: LatentChain, q: ChainParams) -> float:
    return float(counts_loglik(q, transition_counts(chain)))


def q_to_delta(q: ChainParams) -> DeltaParams:
    p1 = stationary_prob(q)
    return DeltaParams(delta11=p1 * q.q1, delta00=(1.0 - p1) * (1.0 - q.q0))


def delta_to_q(d: DeltaParams) -> ChainParams:
    return ChainParams(q0=d.delta01 / d.delta0, q1=d.delta11 / d.delta1)


def _sample_segment(m: int, q: ChainParams, rng: np.random.Generator, initial=None) -> np.ndarray:
    # Alternating runs: a 1-run ends w.p. 1-q1 per step, a 0-run w.p. q0.
    state = int(rng.random() < stationary_prob(q))
    if initial is not None:
        state = int(initial)
    pieces = []
    total = 0
    while total < m:
        batch = int(2 * (m - total) * min(1.0 - q.q1 + q.q0, 1.0)) + 16
        leave = np.empty(batch)
        leave[0::2] = (1.0 - q.q1) if state == 1 else q.q0
        leave[1::2] = q.q0 if state == 1 else (1.0 - q.q1)
        lengths = np.minimum(rng.geometric(leave), m)
        labels = np.empty(batch, dtype=np.int8)
        labels[0::2] = state
        labels[1::2] = 1 - state
        pieces.append(np.repeat(labels, lengths))
        total += int(lengths.sum())
        if batch % 2:
            state = 1 - state
    return np.concatenate(pieces)[:m]


def sample_chain(
    m: int, q: ChainParams, rng: np.random.Generator, segments=None, initial: int | None = None
) -> LatentChain:
    """Forward-simulate the stationary chain; each segment restarts from stationarity.

    ``initial`` pins the first state of every segment instead of drawing it.
    """
    if m < 1:
        raise ValueError("M must be >= 1")
    segments = list(segments) if segments else [(0, m)]
    _check_partition(segments, m)
    states = np.concatenate([_sample_segment(b - a, q, rng, initial) for a, b in segments])
    return LatentChain(states, segments)


def conditional_frequencies(calls, segments=None) -> tuple[float | None, float | None]:
    """Empirical ``(f_{1|1}, f_{1|0})`` of a 0/1 call vector; ``None`` when undefined."""
    calls = np.asarray(calls)
    if len(calls) < 2:
        raise ValueError("need at least two calls")
    n = transition_counts(LatentChain(calls, segments or []))
    f11 = n.n11 / (n.n11 + n.n10) if n.n11 + n.n10 else None
    f10 = n.n01 / (n.n01 + n.n00) if n.n01 + n.n00 else None
    return f11, f10
