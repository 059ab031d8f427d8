"""Channel/sensing data model, ML estimation of CBR and lowest-estimate selection.

Channel indices are 0-based everywhere in the library. Files written for
humans (trace and report CSVs) use 1-based channel numbers.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

from .errors import DomainError

# Estimate reported for a channel that has never been sensed.
UNOBSERVED_SENTINEL = Fraction(1, 2)

SeedLike = Union[None, int, Sequence[int], np.random.Generator]


def as_rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class ChannelSet:
    """True CBR per channel."""

    betas: tuple[float, ...]

    def __post_init__(self) -> None:
        betas = tuple(float(b) for b in self.betas)
        object.__setattr__(self, "betas", betas)
        if len(betas) < 2:
            raise DomainError(f"need at least two channels, got {len(betas)}")
        for b in betas:
            if not 0.0 <= b <= 1.0:
                raise DomainError(f"CBR {b} outside [0, 1]")

    def __len__(self) -> int:
        return len(self.betas)

    @property
    def n_channels(self) -> int:
        return len(self.betas)

    def optimal_set(self) -> tuple[int, ...]:
        lo = min(self.betas)
        return tuple(i for i, b in enumerate(self.betas) if b == lo)

    def wrong_set(self) -> tuple[int, ...]:
        lo = min(self.betas)
        return tuple(i for i, b in enumerate(self.betas) if b != lo)

    def optimal_mask(self) -> np.ndarray:
        b = np.asarray(self.betas)
        return b == b.min()


@dataclass(frozen=True)
class SensingLedger:
    """Per-iteration busy counts and sample counts, one row per iteration.

    Rows are iterations 0, 1, 2, ...; row 0 is the first sensing round.
    """

    busy: np.ndarray
    samples: np.ndarray

    def __post_init__(self) -> None:
        busy = np.array(self.busy, dtype=np.int64, ndmin=2)
        samples = np.array(self.samples, dtype=np.int64, ndmin=2)
        if busy.size == 0:
            busy = busy.reshape(0, busy.shape[-1])
        if samples.size == 0:
            samples = samples.reshape(0, samples.shape[-1])
        if busy.shape != samples.shape:
            raise DomainError(f"busy shape {busy.shape} != samples shape {samples.shape}")
        if np.any(busy < 0) or np.any(busy > samples):
            raise DomainError("busy counts must satisfy 0 <= k <= N per channel and iteration")
        busy.setflags(write=False)
        samples.setflags(write=False)
        object.__setattr__(self, "busy", busy)
        object.__setattr__(self, "samples", samples)

    @classmethod
    def empty(cls, n_channels: int) -> "SensingLedger":
        z = np.zeros((0, n_channels), dtype=np.int64)
        return cls(z, z.copy())

    @property
    def n_iterations(self) -> int:
        return self.busy.shape[0]

    @property
    def n_channels(self) -> int:
        return self.busy.shape[1]

    def budget(self, iteration: int) -> int:
        return int(self.samples[iteration].sum())

    def append(self, busy: Sequence[int], samples: Sequence[int]) -> "SensingLedger":
        busy = np.asarray(busy, dtype=np.int64).reshape(1, -1)
        samples = np.asarray(samples, dtype=np.int64).reshape(1, -1)
        if self.n_iterations and samples.shape[1] != self.n_channels:
            raise DomainError("channel count changed between iterations")
        return SensingLedger(np.vstack([self.busy, busy]), np.vstack([self.samples, samples]))

    def cumulative(self, iteration: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Cumulative (busy, samples) over rows 0..iteration inclusive."""
        if self.n_iterations == 0:
            raise DomainError("empty ledger")
        if iteration is None:
            iteration = self.n_iterations - 1
        if not 0 <= iteration < self.n_iterations:
            raise DomainError(f"iteration {iteration} not in ledger of {self.n_iterations} rows")
        return (self.busy[: iteration + 1].sum(axis=0),
                self.samples[: iteration + 1].sum(axis=0))


@dataclass(frozen=True)
class CbrEstimate:
    """Per-channel estimate kept as the exact integer pair (busy, samples)."""

    busy: tuple[int, ...]
    samples: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "busy", tuple(int(k) for k in self.busy))
        object.__setattr__(self, "samples", tuple(int(n) for n in self.samples))
        if len(self.busy) != len(self.samples):
            raise DomainError("busy and samples lengths differ")

    def __len__(self) -> int:
        return len(self.busy)

    @property
    def observed(self) -> tuple[bool, ...]:
        return tuple(n > 0 for n in self.samples)

    def fractions(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(k, n) if n > 0 else UNOBSERVED_SENTINEL
                     for k, n in zip(self.busy, self.samples))

    @property
    def values(self) -> np.ndarray:
        return np.array([float(f) for f in self.fractions()])


def estimate_cbr(ledger: SensingLedger, iteration: int | None = None) -> CbrEstimate:
    """Cumulative ML estimate k~/N~ for every channel up to ``iteration``."""
    k, n = ledger.cumulative(iteration)
    return CbrEstimate(tuple(k), tuple(n))


def _as_exact(estimate) -> list:
    if isinstance(estimate, CbrEstimate):
        if not any(estimate.observed):
            raise DomainError("no channel has been observed")
        return list(estimate.fractions())
    values = list(estimate)
    if not values:
        raise DomainError("empty estimate vector")
    return [Fraction(v) if not isinstance(v, Fraction) else v for v in values]


def select_channel(estimate, rng: SeedLike = None) -> int:
    """Index of the lowest estimate, ties broken uniformly at random.

    Accepts a :class:`CbrEstimate` (compared as exact rationals) or a plain
    sequence of numbers.
    """
    values = _as_exact(estimate)
    lo = min(values)
    ties = [i for i, v in enumerate(values) if v == lo]
    if len(ties) == 1:
        return ties[0]
    return int(as_rng(rng).choice(ties))


def sample_channels(channels: ChannelSet, plan, seed: SeedLike = None) -> np.ndarray:
    """Draw busy counts k_l ~ Binomial(N_l, beta_l) for one sensing round."""
    counts = np.asarray(tuple(plan), dtype=np.int64)
    if counts.shape != (len(channels),):
        raise DomainError(f"plan length {counts.size} != {len(channels)} channels")
    if np.any(counts < 0):
        raise DomainError("negative sample count in plan")
    return as_rng(seed).binomial(counts, np.asarray(channels.betas))
