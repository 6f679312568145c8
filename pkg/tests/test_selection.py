import math

import numpy as np

from conftest import true_vector
from qctf.ctf.candidates import TrackCandidate
from qctf.ctf.selection import default_threshold, select_tracks
from qctf.ctf.stats import StageStats
from qctf.events import GeneratorConfig, generate_event
from qctf.geometry import DetectorGeometry


def _truth(ev):
    return [TrackCandidate(true_vector(ev, p)) for p in range(len(ev.particles))]


def test_infinite_thresholds(benign_event):
    cands = _truth(benign_event)
    assert len(select_tracks(cands, -math.inf, benign_event)) == len(cands)
    assert select_tracks(cands, math.inf, benign_event) == []


def test_true_tracks_kept_and_fakes_dropped():
    g = DetectorGeometry()
    thr = default_threshold(g.n_layers)
    kept_true = total_true = dropped_fake = total_fake = 0
    for e in range(100):
        ev = generate_event(GeneratorConfig(n=10, rng_seed=500 + e, hit_sigma=0.0), g)
        rng = np.random.default_rng(e)
        fakes = [TrackCandidate(tuple(int(rng.integers(ev.count(l))) for l in range(g.n_layers)))
                 for _ in range(10)]
        truth = _truth(ev)
        kept_true += len(select_tracks(truth, thr, ev))
        total_true += len(truth)
        dropped_fake += len(fakes) - len(select_tracks(fakes, thr, ev))
        total_fake += len(fakes)
    assert kept_true == total_true
    assert dropped_fake >= 0.9 * total_fake


def test_selection_rescores_with_refit(benign_event):
    stats = StageStats()
    out = select_tracks(_truth(benign_event), -math.inf, benign_event, stats=stats)
    assert stats.select_ops == len(out) == stats.k_select
    assert all(c.q == (benign_event.n_layers - 1) - c.chi2_total for c in out)
