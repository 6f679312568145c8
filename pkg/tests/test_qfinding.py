import numpy as np

from qctf.ctf.finding import FindConfig, find_tracks
from qctf.ctf.seeding import SeedCuts, build_seeds, generate_seeds
from qctf.events import GeneratorConfig, generate_event
from qctf.geometry import DetectorGeometry
from qctf.quantum.qfinding import q_find_tracks, repetitions


def _vecs(cands):
    return sorted((c.seed_id, c.vector) for c in cands)


def test_single_particle_always_identical():
    g = DetectorGeometry.with_layers(5)
    for s in range(100):
        ev = generate_event(GeneratorConfig(n=1, rng_seed=s), g)
        seeds = generate_seeds(ev, SeedCuts())
        q, _ = q_find_tracks(seeds, ev, rng=np.random.default_rng(s))
        assert _vecs(q) == _vecs(find_tracks(seeds, ev))


def test_matches_classical_on_small_events():
    g = DetectorGeometry.with_layers(5)
    same = 0
    for s in range(10):
        ev = generate_event(GeneratorConfig(n=12, rng_seed=s), g)
        seeds = generate_seeds(ev, SeedCuts())
        q, led = q_find_tracks(seeds, ev, rng=np.random.default_rng(s))
        same += _vecs(q) == _vecs(find_tracks(seeds, ev))
        assert led.oracle_calls > 0
    assert same >= 8


def test_reproducible_and_bounded_branching():
    g = DetectorGeometry.with_layers(5)
    ev = generate_event(GeneratorConfig(n=10, rng_seed=4), g)
    trip = [[dict(ev.particle_hits(p))[l] for l in range(3)] for p in range(3)]
    seeds = build_seeds(ev, trip)
    a, la = q_find_tracks(seeds, ev, FindConfig(lam=2), np.random.default_rng(1))
    b, lb = q_find_tracks(seeds, ev, FindConfig(lam=2), np.random.default_rng(1))
    assert _vecs(a) == _vecs(b) and la == lb
    for sid in range(3):
        assert sum(c.seed_id == sid for c in a) <= 2 ** (g.n_layers - 3)


def test_repetitions_grow_logarithmically():
    assert repetitions(5, 2, 64) < repetitions(5, 2, 1024) <= repetitions(5, 2, 64) + 13
