"""Experiment drivers producing data tables for the success-probability,
cumulative-sample, gamma-sweep, memory and platoon studies.

Randomness is derived from ``(seed, unit index, strategy index, run index)``
through :class:`numpy.random.SeedSequence` entropy lists, so results do not
depend on the number of workers.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
import os
import subprocess
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .allocation import SearchFrontier, global_optimal, iterative_optimal, n_compositions
from .bounds import BoundEvaluator
from .bumblebee import EngineConfig, run_engine
from .config import read_flat
from .core import ChannelSet
from .errors import CapacityError, ConfigError
from .memory import MemoryConfig
from .montecarlo import (iterations_to_threshold, simulate_adaptive, simulate_fixed_plan)
from .scenario import (ScenarioTrace, TrafficScenario, congestion_scenario, platoon_scenario,
                       run_platoon, synth_trace)

log = logging.getLogger(__name__)

# (L, N) pairs studied in the full gamma sweep
PAPER_SWEEP = tuple((L, N) for L, Ns in ((3, (3, 4, 5, 6, 9)), (4, (4, 5, 6, 7, 8, 12)),
                                         (5, (5, 6, 7, 8, 9, 10, 15)),
                                         (6, (6, 7, 8, 9, 10, 11, 12, 18))) for N in Ns)
DESK_SWEEP = ((3, 3), (3, 6), (4, 5), (4, 8), (5, 7), (6, 9))
BETA_GRID = tuple(round(0.1 * k, 1) for k in range(11))


@dataclass(frozen=True)
class ExperimentConfig:
    experiment_id: str = "experiment"
    kind: str = "bounds"
    betas: tuple[float, ...] | None = (0.2, 0.35, 0.6, 0.8)
    n_budget: int = 8
    n_channels: int | None = None
    iterations: int = 20
    strategies: tuple[str, ...] = ("global", "iterative", "equal", "heuristic")
    gammas: tuple[float, ...] = (-4.0,)
    runs: int = 10_000
    seeds: tuple[int, ...] = (0,)
    threshold: float = 0.9
    sweep_configs: tuple[tuple[int, int], ...] = DESK_SWEEP
    n_beta_sets: int = 20
    horizon: int = 200
    enumeration_cap: int = 10**7
    memory_models: tuple[str, ...] = ("none", "ewma:0.9", "ewma:0.8", "ewma:0.7",
                                      "swa:2", "swa:3", "swa:4")
    window_J: int = 100
    chi: float = 0.1
    duration: float = 140.0
    platoon_size: int = 10
    trace: str | None = None
    scenario: str | None = None

    def __post_init__(self) -> None:
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError("threshold must lie in (0, 1)")
        if self.kind not in ("bounds", "sweep", "memory", "platoon"):
            raise ConfigError(f"unknown experiment kind {self.kind!r}")

    @classmethod
    def from_dict(cls, values: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - names - {"seed"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = {}
        for k, v in values.items():
            if k == "sweep_configs":
                v = tuple(tuple(int(x) for x in pair) for pair in v)
            elif k == "seed":
                k, v = "seeds", (int(v),)
            elif isinstance(v, list):
                v = tuple(v)
            kw[k] = v
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_dict(read_flat(path))

    def to_dict(self) -> dict:
        return json.loads(json.dumps(dataclasses.asdict(self)))

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def paper_scale(self) -> "ExperimentConfig":
        return dataclasses.replace(self, runs=100_000, n_beta_sets=200, sweep_configs=PAPER_SWEEP,
                                   seeds=self.seeds if len(self.seeds) > 1 else tuple(range(10)))

    @property
    def seed(self) -> int:
        return int(self.seeds[0])


def parse_memory(spec: str, window_J: int) -> MemoryConfig:
    """``none``, ``ewma:<alpha>`` or ``swa:<K>``."""
    name, _, arg = spec.partition(":")
    if name == "none":
        return MemoryConfig.none(window_J)
    if name == "ewma":
        return MemoryConfig.ewma(float(arg), window_J)
    if name == "swa":
        return MemoryConfig.swa(int(arg), window_J)
    raise ConfigError(f"bad memory model {spec!r}")


@dataclass
class ExperimentResult:
    experiment_id: str
    config: ExperimentConfig
    tables: dict[str, tuple[list[str], list[list]]] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# --- success-probability curves ------------------------------------------------

def run_bounds_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Per-iteration analytic bounds and Monte Carlo success for each strategy."""
    if config.betas is None:
        raise ConfigError("bounds experiment needs betas")
    channels = ChannelSet(config.betas)
    N, L, I = config.n_budget, len(channels), config.iterations
    for i in range(1, I + 1):
        size = n_compositions(i * N - L * (N // L), L)
        if "global" in config.strategies and size > config.enumeration_cap:
            raise CapacityError(f"iteration {i}: {size} allocations exceed cap "
                                f"{config.enumeration_cap}", i)
    ev = BoundEvaluator(channels, I * N)
    seed = config.seed
    curves: dict[str, np.ndarray] = {}
    counts: dict[str, np.ndarray] = {}

    if "global" in config.strategies:
        g = [global_optimal(channels, N, i, config.enumeration_cap, ev) for i in range(1, I + 1)]
        curves["global_ub"] = np.array([r.bounds.upper for r in g])
        curves["global_lb"] = np.array([r.bounds.lower for r in g])
        counts["global"] = np.array([r.plan.counts for r in g])
    if "iterative" in config.strategies:
        fr = SearchFrontier.start(N, L)
        ub, lb, plans = [], [], []
        for _ in range(I):
            fr, chosen = iterative_optimal(channels, N, fr, evaluator=ev)
            ub.append(fr.bound)
            lb.append(fr.lower)
            plans.append(chosen.counts)
        curves["iterative_ub"] = np.array(ub)
        curves["iterative_lb"] = np.array(lb)
        counts["iterative"] = np.array(plans)
        curves["mc_iterative"] = simulate_fixed_plan(channels, counts["iterative"], config.runs,
                                                     [seed, 0])
    if "equal" in config.strategies:
        r = simulate_adaptive(channels, N, I, config.runs, None, [seed, 1])
        curves["mc_equal"] = r["success"]
        counts["equal"] = r["mean_counts"]
    if "heuristic" in config.strategies:
        for j, gamma in enumerate(config.gammas):
            r = simulate_adaptive(channels, N, I, config.runs, gamma, [seed, 2, j])
            curves[f"mc_heuristic_g{gamma:g}"] = r["success"]
            counts[f"heuristic_g{gamma:g}"] = r["mean_counts"]

    names = list(curves)
    rows = [[i + 1] + [float(curves[n][i]) for n in names] for i in range(I)]
    sample_names = [f"{k}_ch{l + 1}" for k in counts for l in range(L)]
    sample_rows = [[i + 1] + [float(counts[k][i, l]) for k in counts for l in range(L)]
                   for i in range(I)]
    res = ExperimentResult(config.experiment_id, config)
    res.tables["curves"] = (["iteration"] + names, rows)
    res.tables["samples"] = (["iteration"] + sample_names, sample_rows)
    res.summary = {"curves": {k: v.tolist() for k, v in curves.items()},
                   "samples": {k: v.tolist() for k, v in counts.items()}}
    return res


# --- gamma sweep -------------------------------------------------------------

def random_beta_sets(n_channels: int, count: int, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.choice(np.array(BETA_GRID), size=(count, n_channels))


def _sweep_unit(args):
    cfg_idx, set_idx, L, N, betas, gammas, runs, horizon, threshold, seed = args
    channels = ChannelSet(tuple(betas))
    its = {}
    for s, gamma in enumerate((0.0,) + tuple(gammas)):
        curve = simulate_adaptive(channels, N, horizon, runs, gamma or None,
                                  [seed, cfg_idx, set_idx, s])["success"]
        its[gamma] = iterations_to_threshold(curve, threshold)
    return cfg_idx, set_idx, its


def sweep_ratio(it_gamma: int | None, it_equal: int | None, horizon: int) -> tuple[float, bool]:
    """Iterations-to-threshold relative to equal allocation, and whether a cap was hit."""
    flagged = it_gamma is None or it_equal is None
    g = horizon if it_gamma is None else it_gamma
    e = horizon if it_equal is None else it_equal
    return g / e, flagged


def run_gamma_sweep(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    gammas = tuple(g for g in config.gammas if g != 0)
    units = []
    for ci, (L, N) in enumerate(config.sweep_configs):
        sets = random_beta_sets(L, config.n_beta_sets, [config.seed, ci, 999])
        for si, betas in enumerate(sets):
            units.append((ci, si, L, N, tuple(float(b) for b in betas), gammas, config.runs,
                          config.horizon, config.threshold, config.seed))
    out = _map(_sweep_unit, units, workers)

    rows = []
    ratios: dict[float, list[float]] = {g: [] for g in (0.0,) + gammas}
    for (ci, si, L, N, betas, *_), (_, _, its) in zip(units, out):
        for g in (0.0,) + gammas:
            r, flagged = sweep_ratio(its[g], its[0.0], config.horizon)
            ratios[g].append(r)
            rows.append([ci, si, L, N, " ".join(f"{b:g}" for b in betas), g,
                         its[g] if its[g] is not None else "", its[0.0] if its[0.0] is not None else "",
                         r, int(flagged)])
    cdf_rows = []
    summary = {}
    for g, vals in ratios.items():
        v = np.sort(np.array(vals))
        for k, x in enumerate(v):
            cdf_rows.append([g, float(x), (k + 1) / v.size])
        summary[f"{g:g}"] = {"median": float(np.median(v)),
                             "frac_worse": float(np.mean(v > 1.0)),
                             "n": int(v.size)}
    res = ExperimentResult(config.experiment_id, config)
    res.tables["sweep"] = (["config", "beta_set", "L", "N", "betas", "gamma", "iterations",
                            "equal_iterations", "ratio", "flagged"], rows)
    res.tables["cdf"] = (["gamma", "ratio", "cdf"], cdf_rows)
    res.summary = summary
    return res


# --- memory study ------------------------------------------------------------

def memory_engines(config: ExperimentConfig) -> list[EngineConfig]:
    engines = [EngineConfig(0.0, config.chi, MemoryConfig.none(config.window_J), config.n_budget)]
    for gamma in config.gammas:
        for spec in config.memory_models:
            engines.append(EngineConfig(gamma, config.chi, parse_memory(spec, config.window_J),
                                        config.n_budget))
    return engines


def selection_rate(trace: ScenarioTrace, engine: EngineConfig, seed) -> float:
    selected = run_engine(trace.cbr, engine, np.random.default_rng(seed))
    return float(trace.best_mask()[np.arange(selected.size), selected].mean())


def _memory_unit(args):
    trace, engine, seed = args
    return selection_rate(trace, engine, seed)


def run_memory_experiment(trace: ScenarioTrace, config: ExperimentConfig,
                          workers: int = 1) -> ExperimentResult:
    """Best-channel selection rate per engine over seeds, with gains in percentage points."""
    engines = memory_engines(config)
    units = [(trace, e, [s, k]) for k, e in enumerate(engines) for s in config.seeds]
    rates = np.array(_map(_memory_unit, units, workers)).reshape(len(engines), len(config.seeds))
    labels = [e.label for e in engines]
    baseline = {e.gamma: rates[k] for k, e in enumerate(engines) if e.memory.model == "none"}
    rows, summary = [], {}
    for k, e in enumerate(engines):
        ref = baseline.get(e.gamma, rates[0])
        diff = rates[k] - ref
        row = {"gamma": e.gamma, "memory": e.memory.label, "mean": float(rates[k].mean()),
               "sem": float(rates[k].std(ddof=1) / math.sqrt(rates.shape[1])) if rates.shape[1] > 1 else 0.0,
               "gain_pp": float(100 * diff.mean()),
               "gain_sem_pp": float(100 * diff.std(ddof=1) / math.sqrt(diff.size)) if diff.size > 1 else 0.0}
        summary[labels[k]] = dict(row, rates=rates[k].tolist())
        rows.append([labels[k], e.gamma, e.memory.label, row["mean"], row["sem"], row["gain_pp"],
                     row["gain_sem_pp"]])
    per_seed = [[s] + [float(rates[k, j]) for k in range(len(engines))]
                for j, s in enumerate(config.seeds)]
    res = ExperimentResult(config.experiment_id, config)
    res.tables["memory"] = (["engine", "gamma", "memory", "selection_rate", "sem", "gain_pp",
                             "gain_sem_pp"], rows)
    res.tables["memory_seeds"] = (["seed"] + labels, per_seed)
    res.summary = summary
    return res


# --- platoon study -----------------------------------------------------------

def _platoon_unit(args):
    trace_seed, scenario, duration, engine, run = args
    trace = synth_trace(scenario, duration, trace_seed)
    rep = run_platoon(trace, engine, scenario, list(trace_seed) + [run])
    return {
        "match": rep.match_fraction(),
        "switches_60": rep.switch_count(60.0),
        "switches": rep.switch_count(),
        "success": rep.success_ratio().tolist(),
        "report": (rep.header(), list(rep.rows())) if run == 0 else None,
    }


def run_platoon_experiment(config: ExperimentConfig, scenario: TrafficScenario | None = None,
                           workers: int = 1) -> ExperimentResult:
    """Paired runs: each run draws one trace, then every engine runs on it.

    Besides the per-run table, the time series of run 0 is kept for each engine.
    """
    scenario = scenario or platoon_scenario(config.platoon_size)
    engines = [EngineConfig(g, config.chi, MemoryConfig.ewma(0.7, config.window_J),
                            scenario.platoon_size) for g in config.gammas]
    units = [([config.seed, run], scenario, config.duration, e, run)
             for run in range(config.runs) for e in engines]
    out = _map(_platoon_unit, units, workers)
    res = ExperimentResult(config.experiment_id, config)
    rows, summary = [], {f"{e.gamma:g}": [] for e in engines}
    for (_, _, _, e, run), r in zip(units, out):
        report = r.pop("report")
        if report is not None:
            res.tables[f"reception_g{e.gamma:g}"] = report
        summary[f"{e.gamma:g}"].append(r)
        rows.append([run, e.gamma, r["match"], r["switches_60"], r["switches"]] + r["success"])
    followers = scenario.platoon_size - 1
    res.tables["platoon"] = (["run", "gamma", "match_fraction", "switches_first_60s", "switches"]
                             + [f"success_v{p + 1}" for p in range(followers)], rows)
    res.summary = summary
    return res


def default_memory_trace(config: ExperimentConfig) -> ScenarioTrace:
    return synth_trace(congestion_scenario(), config.duration, [config.seed, 7])


# --- reporting ---------------------------------------------------------------

def git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=Path(__file__).resolve().parent, capture_output=True,
                             text=True, timeout=10)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def emit_report(result: ExperimentResult, out_dir) -> list[Path]:
    """Write one CSV per table plus ``<id>_manifest.json``."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, (header, rows) in result.tables.items():
            path = out_dir / f"{result.experiment_id}_{name}.csv"
            with path.open("w") as fh:
                fh.write(",".join(header) + "\n")
                for row in rows:
                    fh.write(",".join(_fmt(v) for v in row) + "\n")
            paths.append(path)
        manifest = {
            "experiment_id": result.experiment_id,
            "config_hash": result.config.digest(),
            "config": result.config.to_dict(),
            "seeds": list(result.config.seeds),
            "build": git_describe(),
            "files": [p.name for p in paths],
            "summary": result.summary,
        }
        mpath = out_dir / f"{result.experiment_id}_manifest.json"
        mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"writing report to {out_dir}: {exc}") from exc
    return paths + [mpath]


def default_workers() -> int:
    return int(os.environ.get("VDSA_WORKERS", "1"))
