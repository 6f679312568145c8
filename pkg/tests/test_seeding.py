import itertools

import numpy as np
import pytest

from conftest import true_vector
from qctf import kalman
from qctf.ctf.seeding import PROMPT_CUTS, SeedCuts, build_seeds, generate_seeds, outward
from qctf.ctf.stats import StageStats
from qctf.events import GeneratorConfig, constructed_event, generate_event, grouped_event
from qctf.geometry import DetectorGeometry


@pytest.mark.parametrize("n", [4, 8, 16])
def test_disabled_cuts_keep_every_triplet(n):
    ev = generate_event(GeneratorConfig(n=n, adversarial=True, rng_seed=n), DetectorGeometry.with_layers(5))
    stats = StageStats()
    seeds = generate_seeds(ev, SeedCuts.disabled(), stats=stats)
    assert len(seeds) == n ** 3 == stats.k_seed
    assert stats.seed_ops == n ** 3


def test_seeds_match_scalar_oracle():
    """Cut each triplet one at a time with the scalar fit and compare."""
    ev = generate_event(GeneratorConfig(n=9, rng_seed=11), DetectorGeometry())
    cuts = SeedCuts()
    ref = set()
    for j in itertools.product(*(range(ev.count(l)) for l in range(3))):
        pts = [ev.point(l, j[l]) for l in range(3)]
        fit = kalman.seed_fit(*pts)
        if cuts.accept(fit.helix[None])[0] and outward(*(p[None] for p in pts))[0]:
            ref.add(j)
    assert generate_seeds(ev, cuts).triplet_set() == ref


def test_true_triplets_survive_default_cuts(benign_event):
    trip = generate_seeds(benign_event).triplet_set()
    for pid in range(20):
        assert true_vector(benign_event, pid)[:3] in trip


def test_cuts_bound_fitted_parameters(benign_event):
    cuts = SeedCuts()
    seeds = generate_seeds(benign_event, cuts)
    pts = [benign_event.layers[l][seeds.triplets[:, l]] for l in range(3)]
    _, _, hp = kalman.fit_triplets(*pts)
    assert np.all(np.abs(hp[:, 4]) <= 1 / cuts.min_pt + 1e-15)
    assert np.all(np.abs(hp[:, 0]) <= cuts.max_d0)
    assert np.all(np.abs(hp[:, 1]) <= cuts.max_z0)


@pytest.mark.parametrize("n,a", [(16, 1), (64, 1), (16, 2), (64, 2)])
def test_constructed_events_have_n_to_the_a_good_seeds(n, a):
    ev = constructed_event(n, a, DetectorGeometry(), rng_seed=n)
    assert len(generate_seeds(ev, PROMPT_CUTS)) == n ** a


def test_single_good_seed_among_decoys():
    ev = grouped_event(1, 1, DetectorGeometry(), rng_seed=0, decoys=31)
    assert len(generate_seeds(ev, PROMPT_CUTS)) == 1


def test_build_seeds_matches_generated_fit(benign_event):
    seeds = generate_seeds(benign_event)
    again = build_seeds(benign_event, seeds.triplets[:10])
    np.testing.assert_allclose(again.states, seeds.states[:10])
    np.testing.assert_allclose(again.covs, seeds.covs[:10])


def test_invalid_cuts():
    with pytest.raises(ValueError):
        SeedCuts(max_d0=0.0)
