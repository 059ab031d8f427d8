"""Vectorized Monte Carlo of best-channel selection under stationary CBR.

Each call simulates ``runs`` independent sensing histories at once. Row ``r``
of every array is one run.
"""
from __future__ import annotations

import numpy as np

from .allocation import heuristic_weights, largest_remainder
from .core import ChannelSet, SeedLike, UNOBSERVED_SENTINEL, as_rng


def equal_plans(n_budget: int, n_channels: int, runs: int, rng: np.random.Generator) -> np.ndarray:
    base, rem = divmod(n_budget, n_channels)
    plans = np.full((runs, n_channels), base, dtype=np.int64)
    if rem:
        rank = np.argsort(rng.random((runs, n_channels)), axis=1)
        plans[np.arange(runs)[:, None], rank[:, :rem]] += 1
    return plans


def select_lowest(values: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Row-wise argmin with ties broken uniformly at random."""
    is_min = values == values.min(axis=1, keepdims=True)
    key = np.where(is_min, rng.random(values.shape), -1.0)
    return np.argmax(key, axis=1)


def _estimates(busy: np.ndarray, samples: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(samples > 0, busy / np.maximum(samples, 1), float(UNOBSERVED_SENTINEL))


def simulate_adaptive(channels: ChannelSet, n_budget: int, iterations: int, runs: int,
                      gamma: float | None = None, seed: SeedLike = None) -> dict[str, np.ndarray]:
    """Equal allocation (``gamma`` None or 0) or the exponential heuristic.

    The first round is always an equal allocation. Returns ``success``
    (per-iteration frequency) and ``mean_counts`` (mean cumulative samples).
    """
    rng = as_rng(seed)
    betas = np.asarray(channels.betas)
    optimal = channels.optimal_mask()
    L = betas.size
    busy = np.zeros((runs, L), dtype=np.int64)
    samples = np.zeros((runs, L), dtype=np.int64)
    success = np.empty(iterations)
    mean_counts = np.empty((iterations, L))
    for i in range(iterations):
        if i == 0 or not gamma:
            plans = equal_plans(n_budget, L, runs, rng)
        else:
            w = heuristic_weights(_estimates(busy, samples), gamma)
            plans = largest_remainder(w, n_budget)
        busy += rng.binomial(plans, betas)
        samples += plans
        chosen = select_lowest(_estimates(busy, samples), rng)
        success[i] = optimal[chosen].mean()
        mean_counts[i] = samples.mean(axis=0)
    return {"success": success, "mean_counts": mean_counts}


def simulate_fixed_plan(channels: ChannelSet, cumulative: np.ndarray, runs: int,
                        seed: SeedLike = None) -> np.ndarray:
    """Success frequency for a given cumulative allocation at each iteration.

    Each iteration is simulated from its own cumulative counts, which has the
    same marginal distribution as accumulating per-round draws.
    """
    rng = as_rng(seed)
    betas = np.asarray(channels.betas)
    optimal = channels.optimal_mask()
    cumulative = np.atleast_2d(np.asarray(cumulative, dtype=np.int64))
    out = np.empty(cumulative.shape[0])
    for i, n in enumerate(cumulative):
        busy = rng.binomial(np.broadcast_to(n, (runs, n.size)), betas)
        chosen = select_lowest(_estimates(busy, np.broadcast_to(n, busy.shape)), rng)
        out[i] = optimal[chosen].mean()
    return out


def iterations_to_threshold(success, threshold: float) -> int | None:
    """First 1-based iteration from which the curve stays at or above ``threshold``."""
    s = np.asarray(success)
    below = np.flatnonzero(s < threshold)
    if below.size == 0:
        return 1
    last = int(below[-1])
    return last + 2 if last + 1 < s.size else None


def first_crossing(curve, threshold: float) -> float | None:
    """Linearly interpolated 1-based iteration where the curve first reaches ``threshold``."""
    c = np.asarray(curve, dtype=float)
    hit = np.flatnonzero(c >= threshold)
    if hit.size == 0:
        return None
    j = int(hit[0])
    if j == 0:
        return 1.0
    lo, hi = c[j - 1], c[j]
    return j + (threshold - lo) / (hi - lo)
