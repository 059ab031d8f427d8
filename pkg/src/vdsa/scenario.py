"""Time-varying CBR traces and the desk-scale platoon evaluation.

The trace generator stands in for a system-level V2V simulator: per-channel
baselines, a slow random oscillation, duty contributions from non-platoon
vehicles within interference range of the platoon, step contributions from
roadside units, and optional bursts (for example another platoon overtaking).

Leader-packet reception is a proxy, ``(1 - beta(t)) * attenuation(position)``,
not a PHY/MAC model.
"""
from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bumblebee import EngineConfig, run_engine
from .config import dump_flat, read_flat
from .core import SeedLike, as_rng
from .errors import ConfigError, DomainError, TraceFormatError


@dataclass(frozen=True)
class ScenarioTrace:
    times: np.ndarray
    cbr: np.ndarray
    events: tuple[tuple[float, str], ...] = ()

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        cbr = np.asarray(self.cbr, dtype=float)
        if cbr.ndim != 2 or cbr.shape[0] != times.size or cbr.shape[0] == 0:
            raise DomainError(f"trace must be a non-empty (T, L) matrix, got {cbr.shape}")
        if np.any(cbr < 0) or np.any(cbr > 1) or np.any(np.isnan(cbr)):
            raise DomainError("CBR values must lie in [0, 1]")
        if np.any(np.diff(times) <= 0):
            raise DomainError("trace times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "cbr", cbr)

    @property
    def dt(self) -> float:
        return float(np.median(np.diff(self.times))) if self.times.size > 1 else math.nan

    @property
    def n_channels(self) -> int:
        return self.cbr.shape[1]

    def best_channels(self) -> np.ndarray:
        """Reference best channel per timestep (lowest index on ties)."""
        return np.argmin(self.cbr, axis=1)

    def best_mask(self) -> np.ndarray:
        return self.cbr == self.cbr.min(axis=1, keepdims=True)


def save_trace(trace: ScenarioTrace, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"beta_{l + 1}" for l in range(trace.n_channels)])
        for t, row in zip(trace.times, trace.cbr):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])
    return path


def load_trace(path) -> ScenarioTrace:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise TraceFormatError(f"{path} is empty", 1)
    header = [h.strip() for h in rows[0]]
    n = len(header) - 1
    if n < 1 or header[0] != "t" or header[1:] != [f"beta_{l + 1}" for l in range(n)]:
        raise TraceFormatError(f"header must be t,beta_1,...,beta_L; got {','.join(header)}", 1)
    times, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != n + 1:
            raise TraceFormatError(f"expected {n + 1} fields, got {len(row)}", lineno)
        try:
            nums = [float(c) for c in row]
        except ValueError as exc:
            raise TraceFormatError(f"non-numeric field ({exc})", lineno) from None
        bad = [v for v in nums[1:] if not 0.0 <= v <= 1.0]
        if bad:
            raise TraceFormatError(f"CBR value {bad[0]} outside [0, 1]", lineno)
        if times and nums[0] <= times[-1]:
            raise TraceFormatError(f"time {nums[0]} does not increase", lineno)
        times.append(nums[0])
        values.append(nums[1:])
    if not times:
        raise TraceFormatError(f"{path} has a header but no rows", 2)
    return ScenarioTrace(np.array(times), np.array(values))


@dataclass(frozen=True)
class Burst:
    """Extra CBR on one channel (0-based) during [start_s, end_s)."""

    channel: int
    start_s: float
    end_s: float
    level: float


@dataclass(frozen=True)
class TrafficScenario:
    """Road, traffic and platoon parameters. Channel numbers in ``rsu_channels`` are 1-based."""

    road_length_km: float = 5.0
    lanes: int = 6
    vehicle_density: float = 10.0            # vehicles/km/lane
    channel_probs: tuple[float, ...] = (0.08, 0.28, 0.16, 0.48)
    traffic_speed_kph: float = 120.0
    rsu_positions_km: tuple[float, ...] = (1.0, 2.0, 3.0, 4.0)
    rsu_channels: tuple[int, ...] = (1, 2, 3, 1)
    rsu_period_ms: float = 2.0
    platoon_size: int = 10
    platoon_speed_kph: float = 130.0
    inter_vehicle_spacing_m: float = 3.0
    message_period_ms: float = 100.0
    message_bytes: int = 300
    vdsa_period_ms: float = 100.0
    sensing_slot_us: float = 32.0
    baselines: tuple[float, ...] = (0.1, 0.1, 0.1, 0.1)
    vehicle_duty: float = 0.003
    rsu_duty: float = 0.15
    interference_range_m: float = 500.0
    rsu_range_m: float = 400.0
    oscillation: float = 0.0
    oscillation_corr: float = 0.95
    bursts: tuple[Burst, ...] = field(default=())

    def __post_init__(self) -> None:
        if abs(sum(self.channel_probs) - 1.0) > 1e-9:
            raise DomainError(f"channel probabilities sum to {sum(self.channel_probs)}, not 1")
        if self.platoon_size < 2:
            raise DomainError("a platoon has at least two vehicles")
        if len(self.baselines) != len(self.channel_probs):
            raise DomainError("one baseline per channel is required")
        if len(self.rsu_positions_km) != len(self.rsu_channels):
            raise DomainError("RSU positions and channels differ in length")
        L = len(self.channel_probs)
        if any(not 1 <= c <= L for c in self.rsu_channels):
            raise DomainError("RSU channel out of range")
        if any(not 0 <= b.channel < L for b in self.bursts):
            raise DomainError("burst channel out of range")

    @property
    def n_channels(self) -> int:
        return len(self.channel_probs)

    @property
    def dt(self) -> float:
        return self.vdsa_period_ms / 1000.0

    @classmethod
    def from_dict(cls, values: dict) -> "TrafficScenario":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - names
        if unknown:
            raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
        kw = {}
        for k, v in values.items():
            if k == "bursts":
                v = tuple(Burst(*b) for b in v)
            elif isinstance(v, list):
                v = tuple(v)
            kw[k] = v
        return cls(**kw)

    @classmethod
    def from_file(cls, path) -> "TrafficScenario":
        return cls.from_dict(read_flat(path))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["bursts"] = [list(dataclasses.astuple(b)) for b in self.bursts]
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    def to_file(self, path) -> None:
        Path(path).write_text(dump_flat(self.to_dict()))


def congestion_scenario() -> TrafficScenario:
    """Four channels oscillating around 0.3/0.05/0.6/0.9 with a congestion episode on channel 2."""
    return TrafficScenario(
        vehicle_density=0.0, rsu_positions_km=(), rsu_channels=(),
        baselines=(0.3, 0.05, 0.6, 0.9), oscillation=0.02, platoon_size=8,
        bursts=(Burst(1, 10.0, 30.0, 0.45), Burst(1, 60.0, 75.0, 0.3),
                Burst(0, 95.0, 110.0, 0.2)),
    )


def platoon_scenario(platoon_size: int = 10) -> TrafficScenario:
    """Motorway run with a regime change at 60 s.

    Before 60 s two low channels sit close together while the others are
    congested; afterwards channel 2 clears and becomes the clear best. Two
    RSUs load already-busy channels later in the run.
    """
    return TrafficScenario(
        platoon_size=platoon_size, baselines=(0.15, 0.1, 0.19, 0.95), oscillation=0.01,
        rsu_positions_km=(3.0, 4.0), rsu_channels=(1, 3),
        bursts=(Burst(1, 0.0, 60.0, 0.85), Burst(0, 60.0, 140.0, 0.5),
                Burst(2, 60.0, 80.0, 0.3)),
    )


def synth_trace(scenario: TrafficScenario, duration: float, seed: SeedLike = None) -> ScenarioTrace:
    if duration <= 0:
        raise DomainError("duration must be positive")
    rng = as_rng(seed)
    dt = scenario.dt
    T = max(1, int(round(duration / dt)))
    t = np.arange(T) * dt
    L = scenario.n_channels
    x_p = scenario.platoon_speed_kph / 3.6 * t
    road = scenario.road_length_km * 1000.0
    cbr = np.tile(np.asarray(scenario.baselines, dtype=float), (T, 1))
    events: list[tuple[float, str]] = []

    if scenario.oscillation > 0:
        rho = scenario.oscillation_corr
        eps = rng.normal(0.0, scenario.oscillation * math.sqrt(1 - rho**2), size=(T, L))
        osc = np.empty((T, L))
        osc[0] = rng.normal(0.0, scenario.oscillation, size=L)
        for k in range(1, T):
            osc[k] = rho * osc[k - 1] + eps[k]
        cbr += osc

    other_lanes = scenario.lanes - 1
    if scenario.vehicle_density > 0 and other_lanes > 0:
        # spawn far enough out that every vehicle able to reach the road in time exists
        reach = 80.0 * duration + scenario.interference_range_m
        lo, hi = -reach, road + reach
        same_dir = other_lanes // 2
        for lane in range(other_lanes):
            count = rng.poisson(scenario.vehicle_density * (hi - lo) / 1000.0)
            x0 = rng.uniform(lo, hi, size=count)
            speed = rng.normal(scenario.traffic_speed_kph, 10.0, size=count) / 3.6
            if lane >= same_dir:
                speed = -speed
            ch = rng.choice(L, size=count, p=np.asarray(scenario.channel_probs))
            x = x0[None, :] + speed[None, :] * t[:, None]
            near = (np.abs(x - x_p[:, None]) <= scenario.interference_range_m) & (x >= 0) & (x <= road)
            for l in range(L):
                cbr[:, l] += scenario.vehicle_duty * near[:, ch == l].sum(axis=1)

    for pos_km, ch in zip(scenario.rsu_positions_km, scenario.rsu_channels):
        inside = np.abs(pos_km * 1000.0 - x_p) <= scenario.rsu_range_m
        cbr[inside, ch - 1] += scenario.rsu_duty
        if inside.any():
            idx = np.flatnonzero(inside)
            events.append((float(t[idx[0]]), f"enter RSU@{pos_km:g}km ch{ch}"))
            events.append((float(t[idx[-1]]), f"leave RSU@{pos_km:g}km ch{ch}"))

    for b in scenario.bursts:
        on = (t >= b.start_s) & (t < b.end_s)
        cbr[on, b.channel] += b.level
        if on.any():
            events.append((b.start_s, f"burst ch{b.channel + 1} +{b.level:g}"))

    return ScenarioTrace(t, np.clip(cbr, 0.0, 1.0), tuple(sorted(events)))


def attenuation(position: int) -> float:
    """Reception multiplier for follower ``position`` (1-based); not a physical model."""
    if position <= 3:
        return 1.0
    return max(0.0, 1.0 - 0.1 * (position - 3) / 6.0)


def rolling_mean(x: np.ndarray, window: int) -> np.ndarray:
    """Trailing mean over ``window`` rows, shorter at the start."""
    x = np.asarray(x, dtype=float)
    c = np.cumsum(np.vstack([np.zeros((1,) + x.shape[1:]), x]), axis=0)
    idx = np.arange(1, x.shape[0] + 1)
    lo = np.maximum(0, idx - window)
    n = (idx - lo).reshape((-1,) + (1,) * (x.ndim - 1))
    return (c[idx] - c[lo]) / n


@dataclass(frozen=True)
class ReceptionReport:
    times: np.ndarray
    selected: np.ndarray
    reference: np.ndarray
    success: np.ndarray          # (T, followers) bool
    rolling: np.ndarray          # (T, followers) rolling success ratio
    cbr_selected: np.ndarray

    @property
    def n_followers(self) -> int:
        return self.success.shape[1]

    def _cut(self, t_max: float | None) -> slice:
        if t_max is None:
            return slice(None)
        return slice(0, int(np.searchsorted(self.times, t_max, side="left")))

    def match_fraction(self, t_max: float | None = None) -> float:
        s = self._cut(t_max)
        return float(np.mean(self.selected[s] == self.reference[s]))

    def switch_count(self, t_max: float | None = None) -> int:
        sel = self.selected[self._cut(t_max)]
        return int(np.count_nonzero(sel[1:] != sel[:-1]))

    def success_ratio(self) -> np.ndarray:
        return self.success.mean(axis=0)

    def rows(self):
        for k in range(self.times.size):
            yield ([float(self.times[k]), int(self.selected[k]) + 1, int(self.reference[k]) + 1]
                   + [float(v) for v in self.rolling[k]])

    def header(self) -> list[str]:
        return ["t", "selected", "reference"] + [f"success_ratio_v{p + 1}" for p in range(self.n_followers)]


def run_platoon(trace: ScenarioTrace, engine: EngineConfig, platoon: TrafficScenario,
                seed: SeedLike = None, oracle: bool = False,
                window_s: float = 10.0) -> ReceptionReport:
    """Run VDSA over the trace and draw leader-packet reception for each follower.

    Sensing and reception use separate streams derived from ``seed`` so an
    oracle run with the same seed sees the same reception draws.
    """
    if trace.n_channels != platoon.n_channels:
        raise DomainError(f"trace has {trace.n_channels} channels, scenario {platoon.n_channels}")
    if trace.times.size > 1 and abs(trace.dt - platoon.dt) > 1e-9:
        raise DomainError(f"trace step {trace.dt} s does not match VDSA period {platoon.dt} s")
    base = seed.integers(2**63) if isinstance(seed, np.random.Generator) else seed
    base = [] if base is None else list(np.atleast_1d(base))
    sense_rng = np.random.default_rng(base + [0])
    rx_rng = np.random.default_rng(base + [1])

    reference = trace.best_channels()
    if oracle:
        selected = reference.copy()
    else:
        cfg = dataclasses.replace(engine, n_budget=platoon.platoon_size)
        selected = run_engine(trace.cbr, cfg, sense_rng)
    T = trace.times.size
    cbr_sel = trace.cbr[np.arange(T), selected]
    followers = platoon.platoon_size - 1
    att = np.array([attenuation(p) for p in range(1, followers + 1)])
    p_ok = (1.0 - cbr_sel)[:, None] * att[None, :]
    success = rx_rng.random((T, followers)) < p_ok
    window = max(1, int(round(window_s / platoon.dt)))
    return ReceptionReport(trace.times, selected, reference, success,
                           rolling_mean(success, window), cbr_sel)
