"""Windowed CBR estimation and SWA/EWMA smoothing."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .core import SensingLedger, UNOBSERVED_SENTINEL
from .errors import DomainError

DEFAULT_K = 4
DEFAULT_ALPHA = 0.7


@dataclass(frozen=True)
class MemoryConfig:
    window_J: int = 100
    model: Literal["none", "swa", "ewma"] = "none"
    K: int = DEFAULT_K
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self) -> None:
        if self.window_J < 1:
            raise DomainError(f"window J must be >= 1, got {self.window_J}")
        if self.model not in ("none", "swa", "ewma"):
            raise DomainError(f"unknown memory model {self.model!r}")
        if self.K < 1:
            raise DomainError(f"SWA length K must be >= 1, got {self.K}")
        if not 0.0 < self.alpha <= 1.0:
            raise DomainError(f"EWMA alpha must be in (0, 1], got {self.alpha}")

    @classmethod
    def none(cls, window_J: int = 100) -> "MemoryConfig":
        return cls(window_J, "none")

    @classmethod
    def swa(cls, K: int = DEFAULT_K, window_J: int = 100) -> "MemoryConfig":
        return cls(window_J, "swa", K=K)

    @classmethod
    def ewma(cls, alpha: float = DEFAULT_ALPHA, window_J: int = 100) -> "MemoryConfig":
        return cls(window_J, "ewma", alpha=alpha)

    @property
    def label(self) -> str:
        if self.model == "swa":
            return f"swa_K{self.K}"
        if self.model == "ewma":
            return f"ewma_a{self.alpha:g}"
        return "none"


@dataclass(frozen=True)
class SmoothedEstimate:
    raw: np.ndarray
    smoothed: np.ndarray


def windowed_estimate(ledger: SensingLedger, iteration: int, window_J: int,
                      previous: Sequence[float] | None = None) -> np.ndarray:
    """Busy fraction over rows iteration-J..iteration (clipped at row 0).

    A channel without samples in the window keeps its ``previous`` value, or
    the unobserved sentinel if there is none.
    """
    if not 0 <= iteration < ledger.n_iterations:
        raise DomainError(f"iteration {iteration} not in ledger")
    lo = max(0, iteration - window_J)
    k = ledger.busy[lo: iteration + 1].sum(axis=0)
    n = ledger.samples[lo: iteration + 1].sum(axis=0)
    fallback = (np.full(ledger.n_channels, float(UNOBSERVED_SENTINEL)) if previous is None
                else np.asarray(previous, dtype=float))
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(n > 0, k / np.maximum(n, 1), fallback)


def swa_smooth(history: Sequence, K: int = DEFAULT_K):
    """Mean of the most recent K entries (fewer during warm-up)."""
    if K < 1:
        raise DomainError("K must be >= 1")
    if len(history) == 0:
        raise DomainError("empty history")
    return np.mean(np.asarray(list(history)[-K:], dtype=float), axis=0)


def ewma_smooth(previous, current, alpha: float = DEFAULT_ALPHA):
    if not 0.0 < alpha <= 1.0:
        raise DomainError(f"alpha must be in (0, 1], got {alpha}")
    if previous is None:
        return current
    return alpha * np.asarray(current, dtype=float) + (1.0 - alpha) * np.asarray(previous, dtype=float)


@dataclass(frozen=True)
class MemoryState:
    """Smoothing state for one decision engine."""

    config: MemoryConfig
    history: tuple[np.ndarray, ...] = field(default=())
    last: np.ndarray | None = None

    def update(self, raw: np.ndarray) -> tuple["MemoryState", SmoothedEstimate]:
        raw = np.asarray(raw, dtype=float)
        cfg = self.config
        if cfg.model == "swa":
            history = (self.history + (raw,))[-cfg.K:]
            out = swa_smooth(history, cfg.K)
        elif cfg.model == "ewma":
            history = ()
            out = ewma_smooth(self.last, raw, cfg.alpha)
        else:
            history = ()
            out = raw
        out = np.asarray(out, dtype=float)
        return MemoryState(cfg, history, out), SmoothedEstimate(raw, out)
