"""Combinatorial Kalman-filter track finding, batched over seeds and branches."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .. import kalman
from ..errors import ConfigError
from ..kalman import DEFAULT_KALMAN, KalmanConfig
from .candidates import GHOST, TrackCandidate
from .seeding import SeedSet
from .stats import StageStats


@dataclass(frozen=True)
class FindConfig:
    chi2_0: float = 9.0
    lam: int = 5
    max_ghosts: int = 2
    chi2_cap: float | None = None     # None means 10 * L
    omega: float = 1.0

    def __post_init__(self):
        if self.lam < 1:
            raise ConfigError("lambda must be at least 1")
        if self.max_ghosts < 0 or self.chi2_0 <= 0:
            raise ConfigError("max_ghosts must be >= 0 and chi2_0 > 0")

    def cap(self, n_layers: int) -> float:
        return 10.0 * n_layers if self.chi2_cap is None else self.chi2_cap


# A slate picks, for every live branch, the hits it may extend with.
# It receives the (branches, hits) predicted chi2 matrix and returns
# (hit_index, mask) arrays of shape (branches, k).
Slate = Callable[[np.ndarray, FindConfig], "tuple[np.ndarray, np.ndarray]"]


def classical_slate(chi2: np.ndarray, cfg: FindConfig):
    """The lowest-chi2 gate-passing hits, at most lambda of them, ties to the lower index."""
    k = min(cfg.lam, chi2.shape[1])
    order = np.argsort(chi2, axis=1, kind="stable")[:, :k]
    vals = np.take_along_axis(chi2, order, axis=1)
    return order, vals < cfg.chi2_0


def _rank_within(groups: np.ndarray) -> np.ndarray:
    """Position of each element inside its run of equal values (input already grouped)."""
    if not len(groups):
        return np.zeros(0, dtype=np.int64)
    starts = np.r_[0, np.flatnonzero(np.diff(groups)) + 1]
    first = np.repeat(starts, np.diff(np.r_[starts, len(groups)]))
    return np.arange(len(groups)) - first


def prune_order(seed_id, vec, chi2, q, upto: int):
    """Sort branches by (seed, quality desc, chi2 asc, hit sequence) and rank them per seed."""
    keys = tuple(vec[:, c] for c in range(upto, -1, -1)) + (chi2, -q, seed_id)
    order = np.lexsort(keys)
    return order, _rank_within(seed_id[order])


def _find_chunk(seeds: SeedSet, event, cfg: FindConfig, kcfg: KalmanConfig, slate: Slate, propagator):
    L = event.n_layers
    radii = event.geometry.layer_radii
    cap = cfg.cap(L)
    B = len(seeds)
    sid = seeds.ids.copy()
    vec = np.full((B, L), GHOST, dtype=np.int64)
    vec[:, :3] = seeds.triplets
    p, C, chi2 = seeds.states.copy(), seeds.covs.copy(), seeds.chi2.copy()
    gh = np.zeros(B, dtype=np.int64)
    q = kalman.quality_score(2, gh, chi2, cfg.omega)
    evals = 0
    for l in range(3, L):
        r_from, r_to = radii[l - 1], radii[l]
        p_pred, C_pred, m_pred, R, _, ok = kalman.predict_arrays(p, C, r_from, r_to, kcfg, propagator)
        with np.errstate(invalid="ignore"):
            ok &= kalman.condition_2x2(R) <= kalman.MAX_CONDITION
        par = np.flatnonzero(ok)
        meas = event.uv[l]
        if len(meas) and len(par):
            c2 = kalman.chi2_arrays(m_pred[par], R[par], meas, r_to)
        else:
            c2 = np.zeros((len(par), len(meas)))
        evals += c2.size
        hit_idx, mask = slate(c2, cfg)
        rows, cols = np.nonzero(mask)
        lonely = np.flatnonzero(~mask.any(axis=1))
        picked = hit_idx[rows, cols]
        cp = np.concatenate([par[rows], par[lonely]])
        hit = np.concatenate([picked, np.full(len(lonely), GHOST, dtype=np.int64)])
        add = np.concatenate([c2[rows, picked], np.zeros(len(lonely))])
        new_chi2 = chi2[cp] + add
        new_gh = gh[cp] + (hit == GHOST)
        keep = (new_gh <= cfg.max_ghosts) & (new_chi2 <= cap)
        cp, hit, new_chi2, new_gh = cp[keep], hit[keep], new_chi2[keep], new_gh[keep]
        new_vec = vec[cp].copy()
        new_vec[:, l] = hit
        new_q = kalman.quality_score(l, new_gh, new_chi2, cfg.omega)
        order, rank = prune_order(sid[cp], new_vec, new_chi2, new_q, l)
        order = order[rank < cfg.lam]
        cp, hit = cp[order], hit[order]
        real = hit != GHOST
        p_new, C_new = p_pred[cp].copy(), C_pred[cp].copy()
        if np.any(real):
            rc = cp[real]
            pf, Cf, _ = kalman.filter_arrays(p_pred[rc], C_pred[rc], R[rc], m_pred[rc], meas[hit[real]],
                                             r_to, kcfg.V)
            p_new[real], C_new[real] = pf, Cf
        sid, vec, p, C = sid[cp], new_vec[order], p_new, C_new
        chi2, gh, q = new_chi2[order], new_gh[order], new_q[order]
    out = [TrackCandidate(tuple(v), p[i], C[i], float(chi2[i]), int(gh[i]), float(q[i]), int(sid[i]))
           for i, v in enumerate(vec.tolist())]
    return out, evals


def find_tracks(seeds: SeedSet, event, cfg: FindConfig = FindConfig(), kcfg: KalmanConfig = DEFAULT_KALMAN,
                stats: StageStats | None = None, slate: Slate = classical_slate,
                propagator=kalman.helix_propagator, budget: int = 1 << 22) -> list[TrackCandidate]:
    """Extend every seed layer by layer, keeping at most ``lam`` branches per seed.

    Hits contribute their predicted chi2 to the running total (it equals the
    filtered chi2 of the updated state).  The output is ordered by seed and,
    within a seed, by the pruning order.
    """
    if event.n_layers < 4:
        raise ConfigError("track finding needs at least one layer beyond the seeding layers")
    per_seed = cfg.lam * max(1, event.n_star)
    chunk = max(1, budget // per_seed)
    out, evals = [], 0
    for start in range(0, len(seeds), chunk):
        part, e = _find_chunk(seeds.subset(slice(start, start + chunk)), event, cfg, kcfg, slate, propagator)
        out.extend(part)
        evals += e
    if stats is not None:
        stats.find_ops += evals
        stats.k_find += len(out)
    return out
