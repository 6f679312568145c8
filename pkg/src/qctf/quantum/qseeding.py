"""Quantum seed generation: count the good triplets, then collect them by Grover sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import qsearch
from ..ctf.seeding import SeedCuts, SeedSet, generate_seeds
from ..kalman import DEFAULT_KALMAN, KalmanConfig
from ..qsearch import QueryLedger, SearchSpace


class SeedSearchOracle(SearchSpace):
    """Marks flat triplet indices ``(j0*n + j1)*n + j2`` over ``n = n*`` hits per layer.

    Indices that point past a layer's last hit are never marked.  The marked
    set is tabulated once with the classical seeding stage; that table is the
    simulator's bookkeeping, not oracle queries.
    """

    def __init__(self, event, cuts: SeedCuts = SeedCuts(), cfg: KalmanConfig = DEFAULT_KALMAN,
                 seeds: SeedSet | None = None):
        self.n = max(event.count(l) for l in range(3))
        self.event = event
        self.cuts = cuts
        good = generate_seeds(event, cuts, cfg) if seeds is None else seeds
        flat = self.flatten(good.triplets)
        self._good_flat = flat
        mask = np.zeros(self.n ** 3, dtype=bool)
        mask[flat] = True
        super().__init__(self.n ** 3, mask)
        self.good = good

    def flatten(self, triplets) -> np.ndarray:
        t = np.asarray(triplets, dtype=np.int64).reshape(-1, 3)
        return (t[:, 0] * self.n + t[:, 1]) * self.n + t[:, 2]

    def fitted(self, flat) -> SeedSet:
        """Seeds for verified marked indices.

        The triplet fit is deterministic, so the fits already made while
        tabulating the marked set are reused rather than recomputed.
        """
        flat = np.sort(np.asarray(flat, dtype=np.int64))
        order = np.argsort(self._good_flat, kind="stable")
        rows = order[np.searchsorted(self._good_flat[order], flat)]
        out = self.good.subset(rows)
        out.ids = np.arange(len(rows))
        return out

    def unflatten(self, flat) -> np.ndarray:
        j0, rem = np.divmod(np.asarray(flat, dtype=np.int64), self.n * self.n)
        j1, j2 = np.divmod(rem, self.n)
        return np.stack([j0, j1, j2], axis=-1)


@dataclass
class QSeedResult:
    seeds: SeedSet
    ledger: QueryLedger
    k_estimate: int
    samples: int
    timed_out: bool


def coupon_timeout(k: int) -> int:
    return int(math.ceil(10 * k * math.log(k + 2)))


def collect_marked(space: SearchSpace, k_target: int, m: int, rng, ledger: QueryLedger, max_samples: int,
                   block: int = 1 << 16):
    """Repeat the ``m``-iteration Grover measurement until ``k_target`` distinct marked items appear.

    Every sample charges ``m`` oracle calls and one classical verification.
    Returns ``(sorted distinct marked indices, samples drawn, finished)``.
    """
    t, N = space.t, space.N
    p = qsearch.grover_success_prob(N, t, m) if t else 0.0
    seen = np.zeros(t, dtype=bool)
    found = 0
    drawn = 0
    while drawn < max_samples and found < k_target:
        b = min(block, max_samples - drawn)
        hit = rng.random(b) < p
        pick = np.full(b, -1, dtype=np.int64)
        pick[hit] = rng.integers(t, size=int(hit.sum())) if t else 0
        # position of each first-ever appearance, in sampling order
        pos = np.flatnonzero(hit)
        vals = pick[pos]
        uniq, first = np.unique(vals, return_index=True)
        fresh = ~seen[uniq]
        new_pos = np.sort(pos[first[fresh]])
        need = k_target - found
        if len(new_pos) >= need:
            used = int(new_pos[need - 1]) + 1
            stop_vals = pick[:used]
            stop_vals = stop_vals[stop_vals >= 0]
            seen[stop_vals] = True
            drawn += used
            found = k_target
            break
        seen[uniq] = True
        found += int(fresh.sum())
        drawn += b
    ledger.charge(m * drawn)
    ledger.verify(drawn)
    marked_ids = np.flatnonzero(seen)
    return space._marked[marked_ids], drawn, found >= k_target


def q_generate_seeds(event, cuts: SeedCuts = SeedCuts(), rng=None, cfg: KalmanConfig = DEFAULT_KALMAN,
                     omega: float = 1.0, oracle: SeedSearchOracle | None = None,
                     ledger: QueryLedger | None = None) -> QSeedResult:
    """Count good triplets, then sample with ``floor(pi/(4 theta))`` iterations until all are seen.

    The collection loop gives up after ``10 k ln(k + 2)`` samples and flags a
    timeout; the seeds found so far are still returned.
    """
    rng = np.random.default_rng() if rng is None else rng
    ledger = QueryLedger() if ledger is None else ledger
    oracle = SeedSearchOracle(event, cuts, cfg) if oracle is None else oracle
    k_est = qsearch.quantum_count(oracle, rng, ledger)
    if k_est <= 0:
        return QSeedResult(SeedSet.empty(omega), ledger, 0, 0, False)
    k_est = min(k_est, oracle.N)
    m = qsearch.grover_iterations(oracle.N, k_est)
    limit = coupon_timeout(k_est)
    flat, drawn, done = collect_marked(oracle, k_est, m, rng, ledger, limit)
    seeds = oracle.fitted(flat)
    return QSeedResult(seeds, ledger, k_est, drawn, not done)
