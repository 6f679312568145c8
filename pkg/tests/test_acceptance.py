"""Acceptance checks: one printed PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (about six minutes on one core).
"""

import math
import time

import numpy as np
import pytest

from oracles import random_steps
from qctf import kalman
from qctf.bench import bench_scaling, fit_scaling, synthetic_candidates
from qctf.ctf.cleaning import clean_improved, clean_original, forest_compatible
from qctf.ctf.candidates import sort_candidates
from qctf.ctf.finding import find_tracks
from qctf.ctf.pipeline import run_pipeline
from qctf.ctf.seeding import PROMPT_CUTS, SeedCuts, generate_seeds
from qctf.events import GeneratorConfig, constructed_event, generate_event, hits_in_patch
from qctf.geometry import DetectorGeometry
from qctf.matching import match_truth
from qctf.qsearch import QueryLedger, SearchSpace, dh_budget, durr_hoyer_min, grover_sample, grover_success_prob
from qctf.quantum.qfinding import q_find_tracks
from qctf.quantum.qseeding import SeedSearchOracle, q_generate_seeds
from qctf.quantum.superposition import SuperpositionConfig, build_table, modified_reference, \
    reconstruct_superposition

pytestmark = pytest.mark.acceptance


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail, seconds, limit):
        timing = f"{seconds:.1f}s / limit {limit}s"
        with capsys.disabled():
            print(f"\n{'PASS' if ok and seconds <= limit else 'FAIL'} criterion {number}: {detail} ({timing})")
        assert ok, detail
        assert seconds <= limit, f"took {seconds:.1f}s, limit {limit}s"
    return emit


def test_chi2_identity(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst, steps = 0.0, 0
    for p, C, m, R, meas, r in random_steps(rng, 10_000):
        pred = np.diagonal(kalman.chi2_arrays(m, R, meas, r))
        _, _, filt = kalman.filter_arrays(p, C, R, m, meas, r, kalman.DEFAULT_KALMAN.V)
        worst = max(worst, float(np.max(np.abs(pred - filt) / (1 + pred))))
        steps += len(p)
    dt = time.perf_counter() - t0
    report(1, steps >= 9_900 and worst <= 1e-9,
           f"chi2 identity over {steps} steps, worst |pred-filt|/(1+chi2) = {worst:.2e} (<= 1e-9)", dt, 5)


def test_cleaning_equivalence(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    same = 0
    for _ in range(200):
        cands = synthetic_candidates(int(rng.integers(1, 2001)), 8, rng, duplicate_fraction=rng.uniform(0, 0.9))
        a = [c.vector for c in clean_improved(cands, 0.5)]
        b = [c.vector for c in clean_original(sort_candidates(cands), 0.5)]
        same += a == b
    dt = time.perf_counter() - t0
    report(2, same == 200, f"improved == original cleaning on {same}/200 sets", dt, 30)


def test_cleaning_scaling(report):
    t0 = time.perf_counter()
    ks = [2 ** e for e in range(8, 15)]
    _, fi = bench_scaling("clean-impr", ks, trials=1)
    _, fo = bench_scaling("clean-orig", ks, trials=1)
    dt = time.perf_counter() - t0
    ok = fi.slope <= 1.2 and fo.slope >= 1.8 and min(fi.r_squared, fo.r_squared) >= 0.98
    report(3, ok, f"cleaning slopes improved {fi.slope:.3f} (r2 {fi.r_squared:.4f}, <= 1.2), "
                  f"original {fo.slope:.3f} (r2 {fo.r_squared:.4f}, >= 1.8)", dt, 120)


def test_worst_case_seeding(report):
    t0 = time.perf_counter()
    g = DetectorGeometry.with_layers(5)
    exact = all(len(generate_seeds(generate_event(GeneratorConfig(n=n, adversarial=True, rng_seed=n), g),
                                   SeedCuts.disabled())) == n ** 3 for n in (4, 8, 16))
    _, fit = bench_scaling("seed", [8, 16, 24, 32, 48, 64], trials=1)
    dt = time.perf_counter() - t0
    report(4, exact and 2.8 <= fit.slope <= 3.2,
           f"k_seed = n^3 for n in {{4, 8, 16}}: {exact}; seeding slope {fit.slope:.3f} in [2.8, 3.2]", dt, 120)


def test_grover_fidelity(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    trials = 10_000
    cells = [(4, 1, 1)] + [(N, t, m) for N in (8, 64, 512) for t in (1, 3) for m in (0, 1, 2, 4)]
    worst_z, bad = 0.0, []
    for N, t, m in cells:
        space = SearchSpace(N, np.arange(N) < t)
        hits = sum(grover_sample(space, m, rng) < t for _ in range(trials))
        p = grover_success_prob(N, t, m)
        sigma = math.sqrt(p * (1 - p) / trials)
        dev = abs(hits / trials - p)
        if dev > 3 * sigma + 1e-12:
            bad.append((N, t, m))
        if sigma > 0:
            worst_z = max(worst_z, dev / sigma)
    forced = grover_success_prob(4, 1, 1)
    dt = time.perf_counter() - t0
    report(5, not bad and abs(forced - 1) < 1e-12,
           f"{len(cells)} Grover cells within 3 sigma (worst {worst_z:.2f} sigma), forced cell p = {forced:.12f}",
           dt, 60)


def _qseed_run(a, ns, events=2, runs=100):
    medians, full, total = [], 0, 0
    for n in ns:
        costs = []
        for e in range(events):
            ev = constructed_event(n, a, DetectorGeometry(), e)
            oracle = SeedSearchOracle(ev, PROMPT_CUTS)
            for s in range(runs):
                res = q_generate_seeds(ev, PROMPT_CUTS, np.random.default_rng([a, n, e, s]), oracle=oracle)
                costs.append(res.ledger.cost)
                full += len(res.seeds) == oracle.t
                total += 1
        medians.append(float(np.median(costs)))
    return fit_scaling(ns, medians), full, total


def test_quantum_seeding(report):
    t0 = time.perf_counter()
    f1, full1, tot1 = _qseed_run(1, [16, 32, 64, 128, 256])
    f2, full2, tot2 = _qseed_run(2, [16, 36, 64, 100, 144, 196, 256])
    dt = time.perf_counter() - t0
    ok = (full1 >= tot1 / 2 and full2 >= tot2 / 2 and abs(f1.slope - 2.0) <= 0.25 and abs(f2.slope - 2.5) <= 0.25)
    report(6, ok, f"full good-seed set in {full1}/{tot1} (a=1) and {full2}/{tot2} (a=2) runs; "
                  f"ledger slopes {f1.slope:.3f} (2 +- 0.25) and {f2.slope:.3f} (2.5 +- 0.25)", dt, 300)


def test_durr_hoyer(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    freqs = []
    for e in range(6, 13):
        N = 2 ** e
        wins = 0
        for _ in range(200):
            keys = rng.normal(size=N)
            led = QueryLedger()
            j, spent = durr_hoyer_min(keys, math.inf, rng, led)
            assert spent == led.oracle_calls <= dh_budget(N)
            wins += j == int(np.argmin(keys))
        freqs.append(wins / 200)
    dt = time.perf_counter() - t0
    report(7, min(freqs) >= 0.5, f"minimum found with frequency >= {min(freqs):.3f} for N = 2^6..2^12 "
                                 f"(>= 0.5); charge bound held on every run", dt, 60)


def test_quantum_track_finding(report):
    t0 = time.perf_counter()
    g = DetectorGeometry.with_layers(5)
    same = 0
    for s in range(100):
        ev = generate_event(GeneratorConfig(n=[8, 16, 24, 32][s % 4], rng_seed=1000 + s), g)
        seeds = generate_seeds(ev, SeedCuts())
        q, _ = q_find_tracks(seeds, ev, rng=np.random.default_rng(s))
        c = find_tracks(seeds, ev)
        same += sorted((x.seed_id, x.vector) for x in q) == sorted((x.seed_id, x.vector) for x in c)
    _, fit = bench_scaling("q-find", [64, 128, 256, 512, 1024], trials=5)
    dt = time.perf_counter() - t0
    report(8, same >= 50 and 0.4 <= fit.slope <= 0.6,
           f"quantum finding equals classical in {same}/100 trials (>= 50); "
           f"per-seed ledger slope {fit.slope:.3f} in [0.4, 0.6]", dt, 300)


def test_superposition_reconstruction(report):
    t0 = time.perf_counter()
    g = DetectorGeometry.with_layers(6)
    cfg = SuperpositionConfig(lam=2)
    ns = [4, 6, 8, 11, 16]
    same, compatible, medians = 0, True, []
    for n in ns:
        costs = []
        for t in range(10):
            ev = generate_event(GeneratorConfig(n=n, rng_seed=2000 + 10 * n + t), g)
            table = build_table(ev, cfg)
            res = reconstruct_superposition(ev, cfg, np.random.default_rng([n, t]), table=table)
            ref = modified_reference(ev, cfg, table)
            compatible &= forest_compatible(res.tracks, cfg.pipeline.f)
            same += sorted(c.vector for c in res.tracks) == sorted(c.vector for c in ref)
            costs.append(res.ledger.cost)
        medians.append(float(np.median(costs)))
    fit = fit_scaling(ns, medians)
    dt = time.perf_counter() - t0
    report(9, same >= 25 and compatible and 2.6 <= fit.slope <= 3.4,
           f"superposition output equals reference in {same}/50 trials (>= 25); forest-compatible on every run: "
           f"{compatible}; ledger slope {fit.slope:.3f} in [2.6, 3.4]", dt, 600)


def test_hit_density(report):
    t0 = time.perf_counter()
    g = DetectorGeometry()
    ns = [2 ** e for e in range(8, 13)]
    means = [np.mean([hits_in_patch(generate_event(GeneratorConfig(n=n, rng_seed=300 + t), g), 2, (0.0, 0.5),
                                    (-3.0, 3.0)) for t in range(5)]) for n in ns]
    fit = fit_scaling(ns, means)
    dt = time.perf_counter() - t0
    report(10, abs(fit.slope - 1) <= 0.15, f"fixed-patch hit count slope {fit.slope:.3f} (1 +- 0.15)", dt, 60)


def test_pipeline_worst_case(report):
    t0 = time.perf_counter()
    _, fit = bench_scaling("pipeline", [8, 16, 24, 32, 48], trials=1)
    dt = time.perf_counter() - t0
    report(11, 3.5 <= fit.slope <= 4.4, f"adversarial pipeline op-count slope {fit.slope:.3f} in [3.5, 4.4]",
           dt, 600)


def test_tracking_sanity(report):
    t0 = time.perf_counter()
    g = DetectorGeometry()
    matched = particles = tracks = 0
    for s in range(100):
        ev = generate_event(GeneratorConfig(n=50, rng_seed=5000 + s), g)
        out, _ = run_pipeline(ev)
        rep = match_truth(out, ev)
        matched += rep.n_matched
        particles += rep.n_particles
        tracks += rep.n_tracks
    eff = matched / particles
    fake = (tracks - matched) / tracks
    dt = time.perf_counter() - t0
    report(12, eff >= 0.95 and fake <= 0.05,
           f"100 benign events: efficiency {eff:.4f} (>= 0.95), fake rate {fake:.4f} (<= 0.05)", dt, 120)
