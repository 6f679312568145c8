import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import grover_statevector
from qctf.errors import EmptySpace
from qctf.qsearch import (QueryLedger, SearchSpace, ThresholdSpace, count_estimate, dh_budget, durr_hoyer_min,
                          exponential_search, grover_iterations, grover_sample, grover_success_prob, quantum_count)


@pytest.mark.parametrize("N,t", [(4, 1), (8, 1), (16, 3), (64, 5), (100, 50), (7, 7)])
def test_success_prob_matches_statevector(N, t):
    for m in range(0, 6):
        assert grover_success_prob(N, t, m) == pytest.approx(grover_statevector(N, range(t), m), abs=1e-12)


def test_forced_cell_is_certain():
    assert grover_success_prob(4, 1, 1) == pytest.approx(1.0)
    space = SearchSpace(4, np.array([False, False, True, False]))
    rng = np.random.default_rng(0)
    assert all(grover_sample(space, 1, rng) == 2 for _ in range(200))


def test_iteration_count():
    assert grover_iterations(4, 1) == 1
    assert grover_iterations(1024, 1) == math.floor(math.pi / (4 * math.asin(1 / 32)))
    assert grover_iterations(10, 0) == 0


def test_ledger_charges_and_subtracts():
    led = QueryLedger()
    led.charge(5)
    led.charge(2, weight=3)
    led.verify(4)
    assert led.snapshot() == {"oracle_calls": 7, "diffusion_calls": 7, "classical_verifications": 4, "cost": 11}
    before = led.copy()
    led.charge(1)
    assert (led - before).oracle_calls == 1
    with pytest.raises(ValueError):
        led.charge(-1)


def test_sample_charges_m(rng):
    led = QueryLedger()
    grover_sample(SearchSpace(16, np.arange(16) < 2), 3, rng, led)
    assert led.oracle_calls == 3


def test_empty_space_raises(rng):
    with pytest.raises(EmptySpace):
        grover_sample(SearchSpace(0), 1, rng)
    with pytest.raises(EmptySpace):
        durr_hoyer_min([], 1.0, rng)


def test_epsilon_failures_come_from_unmarked():
    space = SearchSpace(4, np.array([True, False, False, False]))
    rng = np.random.default_rng(1)
    hits = sum(grover_sample(space, 1, rng, eps=0.3) == 0 for _ in range(4000))
    assert abs(hits / 4000 - 0.7) < 0.03


def test_exponential_search_respects_limit(rng):
    for N in (16, 256, 4096):
        led = QueryLedger()
        i, spent = exponential_search(SearchSpace(N), rng, led)
        assert i is None and spent <= 8 * math.sqrt(N) and led.oracle_calls == spent
        i, spent = exponential_search(SearchSpace(N, np.arange(N) == 7), rng, QueryLedger())
        assert i in (None, 7) and spent <= 8 * math.sqrt(N)


def test_exponential_search_finds_a_marked_item():
    rng = np.random.default_rng(4)
    found = sum(exponential_search(SearchSpace(1024, np.arange(1024) % 97 == 3), rng)[0] is not None
                for _ in range(200))
    assert found >= 190


def test_threshold_space():
    ts = ThresholdSpace([5.0, 1.0, 3.0, 2.0], 3.0)
    assert ts.t == 2
    rng = np.random.default_rng(0)
    assert {ts.sample_marked(rng) for _ in range(50)} == {1, 3}
    assert {ts.sample_unmarked(rng) for _ in range(50)} == {0, 2}


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 12), st.integers(0, 2 ** 32 - 1))
def test_dh_charge_never_exceeds_budget(logN, seed):
    rng = np.random.default_rng(seed)
    keys = rng.normal(size=2 ** logN)
    led = QueryLedger()
    j, spent = durr_hoyer_min(keys, math.inf, rng, led)
    assert spent <= dh_budget(len(keys)) and led.oracle_calls == spent
    assert j is not None


def test_dh_threshold_filters():
    rng = np.random.default_rng(2)
    keys = np.array([5.0, 6.0, 7.0, 8.0])
    assert durr_hoyer_min(keys, 1.0, rng)[0] is None
    hits = [durr_hoyer_min(np.r_[keys, 0.5], 1.0, rng)[0] for _ in range(20)]
    assert hits.count(4) >= 18


def test_dh_true_min_frequency():
    rng = np.random.default_rng(3)
    wins = 0
    for _ in range(300):
        keys = rng.permutation(256).astype(float)
        wins += durr_hoyer_min(keys, math.inf, rng)[0] == int(np.argmin(keys))
    assert wins / 300 >= 0.5


def test_count_estimate_exact_at_the_edges(rng):
    assert count_estimate(64, 0, 16, rng) == 0
    assert count_estimate(64, 64, 16, rng) == 64


def test_quantum_count_is_usually_exact():
    rng = np.random.default_rng(5)
    for N, t in [(512, 1), (512, 17), (4096, 300), (1000, 0)]:
        exact = sum(quantum_count(SearchSpace(N, np.arange(N) < t), rng) == t for _ in range(40))
        assert exact >= 30, (N, t, exact)


def test_quantum_count_charges(rng):
    led = QueryLedger()
    quantum_count(SearchSpace(256, np.arange(256) < 4), rng, led)
    assert led.oracle_calls >= 16
