"""Sensing-sample allocation: equal, globally/iteratively optimal, exponential heuristic."""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .bounds import BoundEvaluator, SuccessBounds
from .core import CbrEstimate, ChannelSet, SeedLike, as_rng
from .errors import CapacityError, DomainError

log = logging.getLogger(__name__)

ENUMERATION_CAP = 10**7
FRONTIER_CAP = 64
TIE_TOL = 1e-12


@dataclass(frozen=True)
class AllocationPlan:
    """Samples per channel. For cumulative plans the total is i*N."""

    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        counts = tuple(int(c) for c in self.counts)
        if any(c < 0 for c in counts):
            raise DomainError(f"negative count in {counts}")
        object.__setattr__(self, "counts", counts)

    def __iter__(self):
        return iter(self.counts)

    def __len__(self) -> int:
        return len(self.counts)

    def __getitem__(self, i):
        return self.counts[i]

    @property
    def total(self) -> int:
        return sum(self.counts)


def equal_allocation(n_budget: int, n_channels: int, rng: SeedLike = None) -> AllocationPlan:
    """floor(N/L) per channel, remainder on distinct channels drawn at random."""
    if n_budget < 0 or n_channels < 1:
        raise DomainError(f"bad budget/channels {n_budget}/{n_channels}")
    base, rem = divmod(n_budget, n_channels)
    counts = np.full(n_channels, base, dtype=np.int64)
    if rem:
        counts[as_rng(rng).choice(n_channels, size=rem, replace=False)] += 1
    return AllocationPlan(tuple(counts))


def n_compositions(total: int, n_channels: int) -> int:
    return math.comb(total + n_channels - 1, n_channels - 1)


def enumerate_allocations(total: int, n_channels: int,
                          base: Sequence[int] | None = None) -> Iterator[tuple[int, ...]]:
    """Every ``base + composition`` of ``total`` extra samples, stars and bars."""
    if total < 0:
        raise DomainError("negative total")
    base = tuple(base) if base is not None else (0,) * n_channels
    if len(base) != n_channels:
        raise DomainError("base length differs from channel count")
    slots = total + n_channels - 1
    for bars in itertools.combinations(range(slots), n_channels - 1):
        edges = (-1,) + bars + (slots,)
        yield tuple(b + edges[j + 1] - edges[j] - 1 for j, b in enumerate(base))


def composition_array(total: int, n_channels: int) -> np.ndarray:
    """All compositions of ``total`` into ``n_channels`` parts, lexicographic order."""
    if n_channels == 1:
        return np.array([[total]], dtype=np.int64)
    parts = []
    for first in range(total + 1):
        rest = composition_array(total - first, n_channels - 1)
        parts.append(np.hstack([np.full((rest.shape[0], 1), first, dtype=np.int64), rest]))
    return np.vstack(parts)


def _first_maximizers(rows: np.ndarray, upper: np.ndarray, tol: float = TIE_TOL):
    """Rows tied for the largest bound, lexicographically sorted."""
    best = upper.max()
    hit = np.flatnonzero(upper >= best - tol)
    tied = rows[hit]
    order = np.lexsort(tied.T[::-1])
    return tied[order], hit[order]


class OptimalAllocation(NamedTuple):
    plan: AllocationPlan
    bounds: SuccessBounds
    maximizers: tuple[tuple[int, ...], ...]


def global_optimal(channels: ChannelSet, n_budget: int, iteration: int,
                   cap: int = ENUMERATION_CAP,
                   evaluator: BoundEvaluator | None = None) -> OptimalAllocation:
    """Cumulative allocation after ``iteration`` rounds maximizing the upper bound.

    Every channel keeps its first-round floor(N/L) samples; the rest of the
    i*N samples are placed freely.
    """
    L = len(channels)
    base = n_budget // L
    if base < 1:
        raise DomainError("global search needs N >= L so every channel is observed")
    free = iteration * n_budget - L * base
    size = n_compositions(free, L)
    if size > cap:
        raise CapacityError(f"{size} allocations exceed the enumeration cap {cap}", iteration)
    evaluator = evaluator or BoundEvaluator(channels, iteration * n_budget)
    rows = composition_array(free, L) + base
    res = evaluator.evaluate(rows)
    tied, hit = _first_maximizers(rows, res["upper"])
    j = hit[0]
    bounds = SuccessBounds(float(res["lower"][j]), float(res["upper"][j]),
                           float(res["p_strict"][j]), float(res["p_equal"][j]))
    return OptimalAllocation(AllocationPlan(tuple(tied[0])), bounds,
                             tuple(tuple(int(x) for x in r) for r in tied))


@dataclass(frozen=True)
class SearchFrontier:
    """Cumulative allocations tied for the best upper bound after ``iteration`` rounds."""

    tuples: tuple[tuple[int, ...], ...]
    bound: float
    iteration: int
    lower: float = math.nan
    truncated: bool = False

    @classmethod
    def start(cls, n_budget: int, n_channels: int) -> "SearchFrontier":
        """The fixed floor(N/L) per channel that precedes the first round."""
        return cls(((n_budget // n_channels,) * n_channels,), math.nan, 0)


def iterative_optimal(channels: ChannelSet, n_budget: int, frontier: SearchFrontier,
                      cap: int = FRONTIER_CAP,
                      evaluator: BoundEvaluator | None = None
                      ) -> tuple[SearchFrontier, AllocationPlan]:
    """Extend every frontier tuple by one round and keep the maximizers.

    Returns the next frontier and its lexicographically first cumulative tuple.
    """
    L = len(channels)
    if n_budget < L:
        raise DomainError("iterative search needs N >= L so every channel is observed")
    target = (frontier.iteration + 1) * n_budget
    extra = target - sum(frontier.tuples[0])
    steps = composition_array(extra, L)
    rows = np.unique(np.vstack([np.asarray(t) + steps for t in frontier.tuples]), axis=0)
    evaluator = evaluator or BoundEvaluator(channels, target)
    res = evaluator.evaluate(rows)
    tied, hit = _first_maximizers(rows, res["upper"])
    truncated = len(tied) > cap
    if truncated:
        log.warning("iteration %d: %d tied allocations, keeping the first %d",
                    frontier.iteration + 1, len(tied), cap)
        tied, hit = tied[:cap], hit[:cap]
    nxt = SearchFrontier(tuple(tuple(int(x) for x in r) for r in tied),
                         float(res["upper"][hit[0]]), frontier.iteration + 1,
                         float(res["lower"][hit[0]]), truncated)
    return nxt, AllocationPlan(nxt.tuples[0])


def largest_remainder(weights: np.ndarray, n_budget: int) -> np.ndarray:
    """Integer counts proportional to ``weights`` summing to ``n_budget``.

    Works on the last axis; leftover samples go to the largest fractional
    parts, ties to the lower channel index.
    """
    w = np.asarray(weights, dtype=float)
    raw = n_budget * w / w.sum(axis=-1, keepdims=True)
    counts = np.floor(raw).astype(np.int64)
    left = n_budget - counts.sum(axis=-1, keepdims=True)
    order = np.argsort(-(raw - counts), axis=-1, kind="stable")
    rank = np.argsort(order, axis=-1, kind="stable")
    return counts + (rank < left)


def heuristic_weights(values: np.ndarray, gamma: float) -> np.ndarray:
    """exp(gamma * estimate), the best channel weighted by the runner-up's estimate.

    Works row-wise on 2-D input. Weights are scaled by a common factor so that
    very negative gamma does not underflow.
    """
    v = np.atleast_2d(np.asarray(values, dtype=float))
    srt = np.sort(v, axis=-1)
    best = np.argmin(v, axis=-1)
    eff = v.copy()
    eff[np.arange(v.shape[0]), best] = srt[:, 1]
    w = np.exp(gamma * (eff - srt[:, 1:2]))
    return w if np.ndim(values) == 2 else w[0]


def heuristic_allocation(prev_estimate, gamma: float, n_budget: int) -> AllocationPlan:
    """Exponential unequal allocation from the previous round's estimates."""
    if gamma > 0:
        raise DomainError(f"gamma must be <= 0, got {gamma}")
    if isinstance(prev_estimate, CbrEstimate):
        if not any(prev_estimate.observed):
            raise DomainError("no channel has a defined estimate")
        values = prev_estimate.values
    else:
        values = np.asarray(prev_estimate, dtype=float)
    if values.size < 2:
        raise DomainError("heuristic allocation needs at least two channels")
    return AllocationPlan(tuple(largest_remainder(heuristic_weights(values, gamma), n_budget)))
