"""Track finding with repeated quantum minimum finding in place of the full chi2 scan."""

from __future__ import annotations

import math

import numpy as np

from .. import qsearch
from ..ctf.finding import FindConfig, find_tracks
from ..ctf.seeding import SeedSet
from ..ctf.stats import StageStats
from ..kalman import DEFAULT_KALMAN, KalmanConfig
from ..qsearch import QueryLedger


def repetitions(n_layers: int, lam: int, n: int) -> int:
    """``ceil(log2(3 L lambda^2 n^3))`` minimum-finding runs per selected hit."""
    return int(math.ceil(math.log2(3 * n_layers * lam * lam * max(n, 1) ** 3)))


class QuantumSlate:
    """Selects up to lambda hits per branch by repeated Durr-Hoyer minimum finding.

    After each selection the chosen hit's key is lifted to infinity so the
    next round finds the next-best hit.  A round that finds nothing below
    the gate ends the branch's selection.
    """

    def __init__(self, rng, ledger: QueryLedger, reps: int, eps: float = 0.0):
        self.rng = rng
        self.ledger = ledger
        self.reps = reps
        self.eps = eps
        self.min_finding_calls = 0

    def __call__(self, chi2: np.ndarray, cfg: FindConfig):
        P, n = chi2.shape
        lam = cfg.lam
        idx = np.zeros((P, lam), dtype=np.int64)
        mask = np.zeros((P, lam), dtype=bool)
        if n == 0:
            return idx, mask
        for row in range(P):
            keys = chi2[row].copy()
            for k in range(min(lam, n)):
                best = None
                for _ in range(self.reps):
                    j, _ = qsearch.durr_hoyer_min(keys, cfg.chi2_0, self.rng, self.ledger, eps=self.eps)
                    self.min_finding_calls += 1
                    if j is not None and (best is None or (keys[j], j) < (keys[best], best)):
                        best = j
                if best is None:
                    break
                idx[row, k] = best
                mask[row, k] = True
                keys[best] = np.inf
        return idx, mask


def q_find_tracks(seeds: SeedSet, event, cfg: FindConfig = FindConfig(), rng=None,
                  kcfg: KalmanConfig = DEFAULT_KALMAN, ledger: QueryLedger | None = None,
                  stats: StageStats | None = None, eps: float = 0.0):
    """Same layer loop and pruning as :func:`find_tracks`; hit selection runs through the simulator.

    Returns ``(candidates, ledger)``.
    """
    rng = np.random.default_rng() if rng is None else rng
    ledger = QueryLedger() if ledger is None else ledger
    slate = QuantumSlate(rng, ledger, repetitions(event.n_layers, cfg.lam, event.n_star), eps)
    cands = find_tracks(seeds, event, cfg, kcfg, stats, slate=slate)
    return cands, ledger
