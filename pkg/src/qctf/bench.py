"""Scaling benchmarks: run a stage over a range of sizes and fit the log-log slope of its cost."""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .ctf.candidates import GHOST, TrackCandidate, sort_candidates
from .ctf.cleaning import clean_improved, clean_original
from .ctf.finding import FindConfig, find_tracks
from .ctf.pipeline import PipelineConfig, run_pipeline
from .ctf.seeding import PROMPT_CUTS, SeedCuts, build_seeds, generate_seeds
from .ctf.stats import StageStats
from .errors import ConfigError
from .events import GeneratorConfig, constructed_event, generate_event
from .geometry import DetectorGeometry
from .quantum.qfinding import q_find_tracks
from .quantum.qseeding import q_generate_seeds
from .quantum.superposition import SuperpositionConfig, reconstruct_superposition

TARGETS = ("seed", "find", "clean-orig", "clean-impr", "pipeline", "q-seed", "q-find", "q-super")


@dataclass(frozen=True)
class BenchConfig:
    master_seed: int = 0
    layers: int = 5                 # seed / find / pipeline / q-find
    clean_layers: int = 8
    f: float = 0.5
    a: int = 1                      # q-seed: n**a good seeds
    k_seeds: int = 4                # q-find: fixed number of true seeds
    super_layers: int = 6
    lam: int = 2                    # q-super branch factor
    workers: int = 1

    def __post_init__(self):
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    r_squared: float
    n_range: tuple[float, float]

    def to_dict(self) -> dict:
        return asdict(self)


def fit_scaling(ns, values) -> ScalingFit:
    """Least-squares line through ``(log n, log value)``."""
    x = np.log(np.asarray(ns, dtype=float))
    y = np.asarray(values, dtype=float)
    if len(x) < 4:
        raise ConfigError("a scaling fit needs at least four sizes")
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise ConfigError("scaling fits need positive finite values")
    y = np.log(y)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return ScalingFit(float(slope), float(intercept), float(r2), (float(np.min(ns)), float(np.max(ns))))


def trial_seed(master_seed: int, n: int, trial: int) -> int:
    return int(np.random.SeedSequence([master_seed, n, trial]).generate_state(1)[0])


def synthetic_candidates(k: int, n_layers: int, rng, duplicate_fraction: float = 0.5,
                         ghost_prob: float = 0.05, max_ghosts: int = 2) -> list[TrackCandidate]:
    """Random candidate sets with controllable overlap.

    Hits are drawn from ``max(k, 16)`` indices per layer, so independent
    candidates rarely collide; a ``duplicate_fraction`` of the candidates
    copy an earlier one and redraw between one and half of its entries.
    """
    pool = max(k, 16)
    M = rng.integers(0, pool, size=(k, n_layers))
    for i in range(1, k):
        if rng.random() < duplicate_fraction:
            M[i] = M[rng.integers(i)]
            redraw = rng.choice(n_layers, size=rng.integers(1, n_layers // 2 + 1), replace=False)
            M[i, redraw] = rng.integers(0, pool, size=len(redraw))
    ghost = (rng.random((k, n_layers)) < ghost_prob) & (np.arange(n_layers) >= 3)
    over = np.cumsum(ghost, axis=1) > max_ghosts
    ghost &= ~over
    M[ghost] = GHOST
    chi2 = rng.uniform(0, 2 * n_layers, size=k)
    m_ghost = ghost.sum(axis=1)
    q = (n_layers - 1) - m_ghost - chi2
    return [TrackCandidate(tuple(v), None, None, float(c), int(g), float(qq), i)
            for i, (v, c, g, qq) in enumerate(zip(M.tolist(), chi2, m_ghost, q))]


def _adversarial(n, cfg, seed):
    g = DetectorGeometry.with_layers(cfg.layers)
    return generate_event(GeneratorConfig(n=n, adversarial=True, rng_seed=seed), g)


def _run_trial(target: str, n: int, trial: int, cfg: BenchConfig) -> dict:
    seed = trial_seed(cfg.master_seed, n, trial)
    rng = np.random.default_rng(seed)
    stats = StageStats()
    charge = 0
    t0 = time.perf_counter()
    if target == "seed":
        generate_seeds(_adversarial(n, cfg, seed), SeedCuts.disabled(), stats=stats)
        metric = stats.seed_ops
    elif target == "find":
        ev = _adversarial(n, cfg, seed)
        find_tracks(generate_seeds(ev, SeedCuts.disabled(), stats=stats), ev, FindConfig(), stats=stats)
        metric = stats.find_ops
    elif target in ("clean-orig", "clean-impr"):
        cands = synthetic_candidates(n, cfg.clean_layers, rng)
        if target == "clean-orig":
            clean_original(sort_candidates(cands), cfg.f, stats)
        else:
            clean_improved(cands, cfg.f, stats)
        stats.k_find = n
        metric = stats.clean_ops
    elif target == "pipeline":
        _, stats = run_pipeline(_adversarial(n, cfg, seed), PipelineConfig(cuts=SeedCuts.disabled()))
        metric = stats.total_ops
    elif target == "q-seed":
        ev = constructed_event(n, cfg.a, DetectorGeometry(), seed)
        res = q_generate_seeds(ev, PROMPT_CUTS, rng)
        stats.k_seed = len(res.seeds)
        charge = metric = res.ledger.cost
    elif target == "q-find":
        ev = generate_event(GeneratorConfig(n=n, rng_seed=seed), DetectorGeometry.with_layers(cfg.layers))
        trip = [[dict(ev.particle_hits(p))[l] for l in range(3)] for p in range(min(cfg.k_seeds, n))]
        cands, ledger = q_find_tracks(build_seeds(ev, trip), ev, FindConfig(), rng, stats=stats)
        stats.k_seed = len(trip)
        charge = ledger.cost
        metric = charge / len(trip)
    elif target == "q-super":
        ev = generate_event(GeneratorConfig(n=n, rng_seed=seed), DetectorGeometry.with_layers(cfg.super_layers))
        res = reconstruct_superposition(ev, SuperpositionConfig(lam=cfg.lam), rng)
        stats.k_select = len(res.tracks)
        charge = metric = res.ledger.cost
    else:
        raise ConfigError(f"unknown bench target {target!r}; choose from {TARGETS}")
    rec = {"n": n, "trial": trial, "metric": float(metric), "charge": int(charge)}
    rec.update({k: v for k, v in stats.to_dict().items()})
    rec["wall"] = time.perf_counter() - t0
    return rec


@dataclass
class BenchResult:
    target: str
    ns: list[int]
    trials: int
    config: BenchConfig
    records: list[dict] = field(default_factory=list)

    def medians(self) -> list[float]:
        return [float(np.median([r["metric"] for r in self.records if r["n"] == n])) for n in self.ns]

    def fit(self) -> ScalingFit:
        return fit_scaling(self.ns, self.medians())

    def columns(self, include_wall: bool = False) -> list[str]:
        cols = list(self.records[0]) if self.records else ["n", "trial", "metric"]
        return cols if include_wall else [c for c in cols if c != "wall"]

    def to_csv(self, include_wall: bool = False) -> str:
        buf = io.StringIO()
        cols = self.columns(include_wall)
        w = csv.DictWriter(buf, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in self.records:
            w.writerow(r)
        return buf.getvalue()

    def to_json(self, include_wall: bool = False) -> str:
        cols = self.columns(include_wall)
        return json.dumps({
            "target": self.target, "ns": self.ns, "trials": self.trials, "config": asdict(self.config),
            "records": [{c: r[c] for c in cols} for r in self.records],
        }, sort_keys=True)


def _task(args):
    return _run_trial(*args)


def bench_scaling(target: str, ns, trials: int = 3, config: BenchConfig = BenchConfig()):
    """Run ``trials`` trials per size and fit median cost against ``n``. Returns (BenchResult, ScalingFit)."""
    if target not in TARGETS:
        raise ConfigError(f"unknown bench target {target!r}; choose from {TARGETS}")
    ns = [int(n) for n in ns]
    if len(ns) < 4 or any(b <= a for a, b in zip(ns, ns[1:])):
        raise ConfigError("ns must be strictly ascending with at least four values")
    if trials < 1:
        raise ConfigError("trials must be at least 1")
    tasks = [(target, n, t, config) for n in ns for t in range(trials)]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            records = list(pool.map(_task, tasks))
    else:
        records = [_task(t) for t in tasks]
    records.sort(key=lambda r: (r["n"], r["trial"]))
    result = BenchResult(target, ns, trials, config, records)
    return result, result.fit()
