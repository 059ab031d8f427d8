"""Stay-or-switch channel decision with switching cost, and the per-iteration VDSA loop."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .allocation import equal_allocation, heuristic_allocation
from .core import SeedLike, SensingLedger, as_rng, select_channel
from .errors import DomainError
from .memory import MemoryConfig, MemoryState, windowed_estimate

DEFAULT_CHI = 0.1
DEFAULT_GAMMA = -2.0


@dataclass(frozen=True)
class EngineConfig:
    """Parameters of one VDSA decision engine. ``gamma == 0`` is uniform sampling."""

    gamma: float = DEFAULT_GAMMA
    chi: float = DEFAULT_CHI
    memory: MemoryConfig = field(default_factory=MemoryConfig)
    n_budget: int = 8

    def __post_init__(self) -> None:
        if self.gamma > 0:
            raise DomainError(f"gamma must be <= 0, got {self.gamma}")
        if self.chi < 0:
            raise DomainError(f"switching cost must be >= 0, got {self.chi}")
        if self.n_budget < 1:
            raise DomainError("sample budget must be positive")

    @property
    def label(self) -> str:
        return f"g{self.gamma:g}_{self.memory.label}"


@dataclass(frozen=True)
class DecisionState:
    current_channel: int
    config: EngineConfig
    memory: MemoryState
    raw: np.ndarray
    smoothed: np.ndarray
    iteration: int = 0
    switches: int = 0

    @property
    def chi(self) -> float:
        return self.config.chi


def switching_decision(current: int, smoothed, chi: float = DEFAULT_CHI,
                       rng: SeedLike = None) -> int:
    """Move to the best other channel only if it beats the current one by ``chi``."""
    values = np.asarray(smoothed, dtype=float)
    if not 0 <= current < values.size:
        raise DomainError(f"current channel {current} out of range")
    candidates = [l for l in range(values.size) if l != current]
    if not candidates:
        return current
    best = candidates[select_channel([values[l] for l in candidates], rng)]
    return best if values[current] >= values[best] + chi else current


def _allocate(config: EngineConfig, n_channels: int, estimates, rng) -> np.ndarray:
    if config.gamma == 0 or estimates is None:
        plan = equal_allocation(config.n_budget, n_channels, rng)
    else:
        plan = heuristic_allocation(estimates, config.gamma, config.n_budget)
    return np.asarray(plan.counts, dtype=np.int64)


def initialize(config: EngineConfig, betas, rng: SeedLike = None
               ) -> tuple[DecisionState, SensingLedger]:
    """Uniform first sensing round; start on its lowest estimate."""
    rng = as_rng(rng)
    betas = np.asarray(betas, dtype=float)
    plan = _allocate(config, betas.size, None, rng)
    ledger = SensingLedger.empty(betas.size).append(rng.binomial(plan, betas), plan)
    raw = windowed_estimate(ledger, 0, config.memory.window_J)
    memory, est = MemoryState(config.memory).update(raw)
    current = select_channel(list(est.smoothed), rng)
    return DecisionState(current, config, memory, raw, est.smoothed), ledger


def vdsa_step(state: DecisionState, betas, ledger: SensingLedger, rng: SeedLike = None
              ) -> tuple[DecisionState, SensingLedger, int]:
    """Allocate, sense, estimate, smooth, decide. Returns the new selection."""
    rng = as_rng(rng)
    cfg = state.config
    betas = np.asarray(betas, dtype=float)
    plan = _allocate(cfg, betas.size, state.smoothed, rng)
    ledger = ledger.append(rng.binomial(plan, betas), plan)
    i = ledger.n_iterations - 1
    raw = windowed_estimate(ledger, i, cfg.memory.window_J, previous=state.raw)
    memory, est = state.memory.update(raw)
    chosen = switching_decision(state.current_channel, est.smoothed, cfg.chi, rng)
    new = replace(state, current_channel=chosen, memory=memory, raw=raw,
                  smoothed=est.smoothed, iteration=i,
                  switches=state.switches + (chosen != state.current_channel))
    return new, ledger, chosen


def run_engine(cbr: np.ndarray, config: EngineConfig, rng: SeedLike = None) -> np.ndarray:
    """Selected channel at every row of a (T, L) CBR matrix; row 0 is initialization."""
    rng = as_rng(rng)
    cbr = np.asarray(cbr, dtype=float)
    state, ledger = initialize(config, cbr[0], rng)
    selected = np.empty(cbr.shape[0], dtype=np.int64)
    selected[0] = state.current_channel
    for t in range(1, cbr.shape[0]):
        state, ledger, selected[t] = vdsa_step(state, cbr[t], ledger, rng)
    return selected


def run_exact(cbr: np.ndarray, chi: float, memory: MemoryConfig | None = None,
              rng: SeedLike = None) -> np.ndarray:
    """Decision sequence when the engine sees the true CBR instead of sensing."""
    rng = as_rng(rng)
    cbr = np.asarray(cbr, dtype=float)
    mem = MemoryState(memory or MemoryConfig())
    mem, est = mem.update(cbr[0])
    selected = np.empty(cbr.shape[0], dtype=np.int64)
    selected[0] = select_channel(list(est.smoothed), rng)
    for t in range(1, cbr.shape[0]):
        mem, est = mem.update(cbr[t])
        selected[t] = switching_decision(int(selected[t - 1]), est.smoothed, chi, rng)
    return selected


def count_switches(selected) -> int:
    s = np.asarray(selected)
    return int(np.count_nonzero(s[1:] != s[:-1]))
