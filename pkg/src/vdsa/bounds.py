"""Exact distribution of CBR estimates and bounds on best-channel selection.

Two routes compute the same bounds:

* the reference route builds :class:`DiscreteDistribution` objects over exact
  rational support points and evaluates the sums one support point at a time;
* :class:`BoundEvaluator` evaluates many cumulative allocations at once with
  numpy, using precomputed binomial tail tables and integer arithmetic to
  place every support point. The allocation searches use this route.

:func:`brute_force_success` is an independent oracle that enumerates every
joint sensing outcome.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import stats

from .core import ChannelSet
from .errors import CapacityError, DomainError

PRUNE_BELOW = 1e-300
ORACLE_LIMIT = 10**6


def binomial_pmf(n: int, p: float) -> list[float]:
    """Binomial(n, p) masses for q = 0..n, computed in log space."""
    if n < 0:
        raise DomainError(f"negative trial count {n}")
    if p <= 0.0:
        return [1.0] + [0.0] * n
    if p >= 1.0:
        return [0.0] * n + [1.0]
    lp, lq = math.log(p), math.log1p(-p)
    # log of the exact integer coefficient; lgamma loses ~1e-11 at large n
    out, c = [], 1
    for q in range(n + 1):
        out.append(math.exp(math.log(c) + q * lp + (n - q) * lq))
        c = c * (n - q) // (q + 1)
    return out


@dataclass(frozen=True)
class DiscreteDistribution:
    """Probability mass over sorted exact rational support points."""

    support: tuple[Fraction, ...]
    masses: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.support) != len(self.masses):
            raise DomainError("support and masses differ in length")
        if not self.support:
            raise DomainError("empty distribution")
        if any(a >= b for a, b in zip(self.support, self.support[1:])):
            raise DomainError("support must be strictly increasing")

    @cached_property
    def _tail(self) -> tuple[float, ...]:
        # _tail[j] = sum of masses[j:]
        out = [0.0] * (len(self.masses) + 1)
        for j in range(len(self.masses) - 1, -1, -1):
            out[j] = math.fsum(self.masses[j:])
        return tuple(out)

    def total(self) -> float:
        return math.fsum(self.masses)

    def mass_at(self, x: Fraction) -> float:
        j = bisect.bisect_left(self.support, x)
        if j < len(self.support) and self.support[j] == x:
            return self.masses[j]
        return 0.0

    def prob_gt(self, x: Fraction) -> float:
        return self._tail[bisect.bisect_right(self.support, x)]

    def prob_ge(self, x: Fraction) -> float:
        return self._tail[bisect.bisect_left(self.support, x)]

    def prob_lt(self, x: Fraction) -> float:
        return math.fsum(self.masses[: bisect.bisect_left(self.support, x)])

    def cdf(self, x: Fraction) -> float:
        return math.fsum(self.masses[: bisect.bisect_right(self.support, x)])


def estimate_distribution(beta: float, cumulative_samples: int) -> DiscreteDistribution:
    """Distribution of k~/N~ with k~ ~ Binomial(N~, beta)."""
    if not 0.0 <= beta <= 1.0:
        raise DomainError(f"beta {beta} outside [0, 1]")
    if cumulative_samples < 1:
        raise DomainError("an estimate needs at least one sample")
    n = int(cumulative_samples)
    pmf = binomial_pmf(n, beta)
    pairs = [(Fraction(q, n), m) for q, m in enumerate(pmf) if m >= PRUNE_BELOW]
    return DiscreteDistribution(tuple(s for s, _ in pairs), tuple(m for _, m in pairs))


def min_distribution(dists: Sequence[DiscreteDistribution]) -> DiscreteDistribution:
    """Distribution of the minimum of independent variables.

    Equal rationals coming from different denominators share one support point.
    """
    if not dists:
        raise DomainError("min of an empty list")
    if len(dists) == 1:
        return dists[0]
    merged = sorted(set().union(*(d.support for d in dists)))
    support, masses = [], []
    for v in merged:
        # Pr{min = v} = prod Pr{X >= v} - prod Pr{X > v}
        m = math.prod(d.prob_ge(v) for d in dists) - math.prod(d.prob_gt(v) for d in dists)
        if m >= PRUNE_BELOW:
            support.append(v)
            masses.append(m)
    return DiscreteDistribution(tuple(support), tuple(masses))


@dataclass(frozen=True)
class MinDistributionPair:
    dist_b: DiscreteDistribution
    dist_c: DiscreteDistribution | None


@dataclass(frozen=True)
class SuccessBounds:
    lower: float
    upper: float
    p_strict: float
    p_equal: float
    p_greater: float = math.nan


def success_bounds(pair: MinDistributionPair, n_optimal: int, n_wrong: int) -> SuccessBounds:
    """Tightened lower and upper bounds on Pr{selected channel is optimal}."""
    if n_optimal < 1:
        raise DomainError("at least one optimal channel is required")
    if n_wrong == 0 or pair.dist_c is None:
        return SuccessBounds(1.0, 1.0, 1.0, 0.0, 0.0)
    b, c = pair.dist_b, pair.dist_c
    p_strict = math.fsum(m * c.prob_gt(v) for v, m in zip(b.support, b.masses))
    p_equal = math.fsum(m * c.mass_at(v) for v, m in zip(b.support, b.masses))
    p_greater = math.fsum(m * c.prob_lt(v) for v, m in zip(b.support, b.masses))
    lower = p_strict + p_equal / (n_wrong + 1)
    upper = p_strict + p_equal * n_optimal / (n_optimal + 1)
    return SuccessBounds(lower, upper, p_strict, p_equal, p_greater)


def min_pair(channels: ChannelSet, cumulative: Sequence[int]) -> MinDistributionPair:
    cumulative = tuple(int(n) for n in cumulative)
    if len(cumulative) != len(channels):
        raise DomainError("allocation length differs from channel count")
    dists = [estimate_distribution(b, n) for b, n in zip(channels.betas, cumulative)]
    wrong = channels.wrong_set()
    return MinDistributionPair(
        min_distribution([dists[i] for i in channels.optimal_set()]),
        min_distribution([dists[i] for i in wrong]) if wrong else None,
    )


def bounds_for_plan(channels: ChannelSet, cumulative: Sequence[int]) -> SuccessBounds:
    """Reference-route bounds for one cumulative allocation."""
    return success_bounds(min_pair(channels, cumulative),
                          len(channels.optimal_set()), len(channels.wrong_set()))


def brute_force_success(channels: ChannelSet, cumulative_plan: Sequence[int]) -> float:
    """Exact success probability by enumerating every joint outcome."""
    n = [int(x) for x in cumulative_plan]
    if len(n) != len(channels):
        raise DomainError("allocation length differs from channel count")
    if any(x < 1 for x in n):
        raise DomainError("every channel needs at least one cumulative sample")
    size = math.prod(x + 1 for x in n)
    if size > ORACLE_LIMIT:
        raise CapacityError(f"{size} joint outcomes exceed the oracle limit {ORACLE_LIMIT}")

    pmfs = []
    for beta, nl in zip(channels.betas, n):
        pmfs.append(np.array([math.comb(nl, k) * beta**k * (1.0 - beta) ** (nl - k)
                              for k in range(nl + 1)]))
    grid = np.indices([x + 1 for x in n]).reshape(len(n), -1).T
    prob = np.ones(grid.shape[0])
    for l, pmf in enumerate(pmfs):
        prob *= pmf[grid[:, l]]

    # k/N compared exactly on a common denominator
    lcm = math.lcm(*n)
    scaled = grid * np.array([lcm // x for x in n])
    is_min = scaled == scaled.min(axis=1, keepdims=True)
    optimal = channels.optimal_mask()
    share = (is_min & optimal).sum(axis=1) / is_min.sum(axis=1)
    return float(math.fsum(prob * share))


class BoundEvaluator:
    """Vectorized bounds for many cumulative allocations of one channel set."""

    def __init__(self, channels: ChannelSet, max_samples: int = 64, chunk_elems: int = 1 << 20):
        self.channels = channels
        self.optimal = channels.optimal_set()
        self.wrong = channels.wrong_set()
        self.chunk_elems = chunk_elems
        self._tables: list[np.ndarray] = []
        self._max = -1
        self._grow(max_samples)

    def _grow(self, max_samples: int) -> None:
        if max_samples <= self._max:
            return
        n = np.arange(max_samples + 1)[:, None]
        s = np.arange(max_samples + 2)[None, :]
        self._tables = []
        for beta in self.channels.betas:
            # table[n, s] = Pr{Binomial(n, beta) >= s}
            t = stats.binom.sf(s - 1, n, beta)
            t = np.where(s <= n, t, 0.0)
            t[:, 0] = 1.0
            self._tables.append(np.ascontiguousarray(t))
        self._max = max_samples

    def evaluate(self, tuples) -> dict[str, np.ndarray]:
        """Return arrays ``lower``, ``upper``, ``p_strict``, ``p_equal`` per row."""
        t = np.atleast_2d(np.asarray(tuples, dtype=np.int64))
        if t.shape[1] != len(self.channels):
            raise DomainError("allocation length differs from channel count")
        if t.size and t.min() < 1:
            raise DomainError("every channel needs at least one cumulative sample")
        m = t.shape[0]
        p_strict = np.empty(m)
        p_equal = np.empty(m)
        if not self.wrong:
            ones = np.ones(m)
            return {"lower": ones, "upper": ones.copy(), "p_strict": ones.copy(),
                    "p_equal": np.zeros(m)}
        self._grow(int(t.max()) if m else 0)

        width = t[:, list(self.optimal)].sum(axis=1) + len(self.optimal)
        order = np.argsort(width, kind="stable")
        width = width[order]
        start = 0
        while start < m:
            k = max(1, self.chunk_elems // int(width[start]))
            while k > 1 and k * int(width[min(m, start + k) - 1]) > self.chunk_elems:
                k //= 2
            idx = order[start:start + k]
            p_strict[idx], p_equal[idx] = self._chunk(t[idx])
            start += k

        n_o, n_w = len(self.optimal), len(self.wrong)
        return {
            "lower": p_strict + p_equal / (n_w + 1),
            "upper": p_strict + p_equal * n_o / (n_o + 1),
            "p_strict": p_strict,
            "p_equal": p_equal,
        }

    def _chunk(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        p_strict = np.zeros(t.shape[0])
        p_equal = np.zeros(t.shape[0])
        for j, o in enumerate(self.optimal):
            denom = t[:, o][:, None]
            q = np.arange(int(denom.max()) + 1)[None, :]
            valid = q <= denom
            q = np.minimum(q, denom)
            # a point already in the support of an earlier optimal channel is counted there
            for prev in self.optimal[:j]:
                valid &= (q * t[:, prev][:, None]) % denom != 0
            h_o = np.ones(valid.shape)
            g_o = np.ones(valid.shape)
            h_w = np.ones(valid.shape)
            g_w = np.ones(valid.shape)
            for l, table in enumerate(self._tables):
                nl = t[:, l][:, None]
                a = q * nl
                gt = table[nl, a // denom + 1]
                ge = table[nl, -((-a) // denom)]
                if l in self.optimal:
                    h_o *= ge
                    g_o *= gt
                else:
                    h_w *= ge
                    g_w *= gt
            mass_b = np.where(valid, h_o - g_o, 0.0)
            p_strict += (mass_b * g_w).sum(axis=1)
            p_equal += (mass_b * (h_w - g_w)).sum(axis=1)
        return p_strict, p_equal

    def bounds(self, cumulative: Sequence[int]) -> SuccessBounds:
        r = self.evaluate([cumulative])
        return SuccessBounds(float(r["lower"][0]), float(r["upper"][0]),
                             float(r["p_strict"][0]), float(r["p_equal"][0]))
