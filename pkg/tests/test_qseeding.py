import numpy as np
import pytest

from qctf.ctf.seeding import PROMPT_CUTS, SeedCuts, generate_seeds
from qctf.events import GeneratorConfig, constructed_event, generate_event
from qctf.geometry import DetectorGeometry
from qctf.quantum.qseeding import SeedSearchOracle, coupon_timeout, q_generate_seeds


def _set(triplets):
    return {tuple(t) for t in np.asarray(triplets).tolist()}


@pytest.mark.parametrize("a,n", [(1, 16), (2, 16), (1, 25)])
def test_constructed_events_recover_all_good_seeds(a, n):
    full = 0
    for s in range(20):
        ev = constructed_event(n, a, DetectorGeometry(), s)
        classical = _set(generate_seeds(ev, PROMPT_CUTS).triplets)
        assert len(classical) == n ** a
        res = q_generate_seeds(ev, PROMPT_CUTS, np.random.default_rng(s))
        got = _set(res.seeds.triplets)
        assert got <= classical
        full += got == classical
    assert full >= 10


def test_seeds_are_fitted_like_classical():
    ev = generate_event(GeneratorConfig(n=6, rng_seed=1), DetectorGeometry())
    classical = generate_seeds(ev, SeedCuts())
    res = q_generate_seeds(ev, SeedCuts(), np.random.default_rng(0))
    by_trip = {tuple(t): i for i, t in enumerate(classical.triplets.tolist())}
    for i, t in enumerate(res.seeds.triplets.tolist()):
        j = by_trip[tuple(t)]
        np.testing.assert_allclose(res.seeds.states[i], classical.states[j])


def test_no_good_seed_returns_empty():
    ev = generate_event(GeneratorConfig(n=4, rng_seed=0), DetectorGeometry())
    impossible = SeedCuts(min_pt=1e12)
    res = q_generate_seeds(ev, impossible, np.random.default_rng(0))
    assert len(res.seeds) == 0 and res.k_estimate == 0 and res.ledger.oracle_calls > 0


def test_oracle_flat_index_round_trip():
    ev = generate_event(GeneratorConfig(n=5, rng_seed=2), DetectorGeometry())
    orc = SeedSearchOracle(ev, SeedCuts.disabled())
    assert orc.t == 125
    trip = np.array([[1, 2, 3], [4, 0, 2]])
    np.testing.assert_array_equal(orc.unflatten(orc.flatten(trip)), trip)


def test_timeout_is_reported():
    assert coupon_timeout(1) == int(np.ceil(10 * np.log(3)))


def test_reproducible():
    ev = constructed_event(16, 1, DetectorGeometry(), 0)
    a = q_generate_seeds(ev, PROMPT_CUTS, np.random.default_rng(9))
    b = q_generate_seeds(ev, PROMPT_CUTS, np.random.default_rng(9))
    assert a.ledger == b.ledger and _set(a.seeds.triplets) == _set(b.seeds.triplets)
