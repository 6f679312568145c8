"""Reconstruction by minimum finding over every candidate of a fixed-width finding tree.

Every good seed is extended by exactly ``lam`` children per layer: the
``lam`` hits of lowest predicted chi2 or, when none passes the gate, a ghost
followed by the ``lam - 1`` lowest.  A candidate is addressed by its seed's
flat triplet index and one choice digit per layer beyond the seeding layers,
so the space has ``n^3 * lam^(L-3)`` entries.  Candidates that the classical
finder would also have produced, and that pass the selection threshold after
smoothing, carry score ``-q``; every other index scores ``INF``.

Rounds then alternate a repeated Durr-Hoyer minimum search over the scores
with an r-tuple forest update that marks every candidate in conflict with
the newly accepted track.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .. import kalman, qsearch
from ..ctf.candidates import GHOST, TrackCandidate, sort_candidates
from ..ctf.cleaning import TupleForest, _bulk_keys, clean_improved, tuple_size
from ..ctf.finding import FindConfig, prune_order
from ..ctf.pipeline import PipelineConfig
from ..ctf.seeding import SeedSet, generate_seeds
from ..ctf.selection import smooth_candidates
from ..errors import ConfigError
from ..qsearch import QueryLedger

INF = math.inf


@dataclass(frozen=True)
class SuperpositionConfig:
    lam: int = 2
    epsilon: float = 0.0
    oracle_c: float = 1.0          # each score evaluation is priced ceil(c sqrt(n)) ledger units
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)

    def __post_init__(self):
        if self.lam < 1:
            raise ConfigError("lambda must be at least 1")
        if not 0 <= self.epsilon < 1:
            raise ConfigError("epsilon must lie in [0, 1)")
        if self.oracle_c <= 0:
            raise ConfigError("oracle_c must be positive")

    @property
    def find(self) -> FindConfig:
        return replace(self.pipeline.find, lam=self.lam)


@dataclass(frozen=True)
class CandidateIndex:
    seed_flat: int
    branch_choices: tuple[int, ...]

    def encode(self, lam: int) -> int:
        idx = self.seed_flat
        for d in self.branch_choices:
            if not 0 <= d < lam:
                raise ValueError("branch choice out of range")
            idx = idx * lam + d
        return idx

    @classmethod
    def decode(cls, index: int, lam: int, depth: int) -> "CandidateIndex":
        digits = []
        for _ in range(depth):
            index, d = divmod(index, lam)
            digits.append(d)
        return cls(int(index), tuple(reversed(digits)))


@dataclass
class CandidateTable:
    """Every enumerated path of the fixed-width tree plus its score.

    Rows cover good seeds only; every other index of the space scores INF.
    """

    n: int
    lam: int
    depth: int
    index: np.ndarray        # (P,) flat candidate index
    vectors: np.ndarray      # (P, L) hit vectors
    chi2: np.ndarray         # (P,) running chi2 of the finder
    m_ghost: np.ndarray
    q: np.ndarray            # finder quality
    valid: np.ndarray        # classical survivor and above the selection threshold
    seed_id: np.ndarray

    @property
    def space_size(self) -> int:
        return self.n ** 3 * self.lam ** self.depth

    def candidate(self, row: int) -> TrackCandidate:
        return TrackCandidate(tuple(self.vectors[row].tolist()), None, None, float(self.chi2[row]),
                              int(self.m_ghost[row]), float(self.q[row]), int(self.seed_id[row]))

    def valid_candidates(self) -> list[TrackCandidate]:
        return [self.candidate(i) for i in np.flatnonzero(self.valid)]

    def scores(self) -> dict[int, float]:
        return {int(self.index[i]): -float(self.q[i]) for i in np.flatnonzero(self.valid)}


def _fixed_width_slate(c2: np.ndarray, lam: int, chi2_0: float):
    """Children of every branch: hit index (GHOST for the ghost child), chi2 added, gate flag."""
    P, n = c2.shape
    k = min(lam, n)
    order = np.argsort(c2, axis=1, kind="stable")[:, :k]
    vals = np.take_along_axis(c2, order, axis=1)
    passing = vals < chi2_0
    any_pass = passing.any(axis=1)
    hits = np.full((P, lam), GHOST, dtype=np.int64)
    add = np.full((P, lam), np.inf)
    exists = np.zeros((P, lam), dtype=bool)
    accept = np.zeros((P, lam), dtype=bool)
    hits[any_pass, :k] = order[any_pass]
    add[any_pass, :k] = vals[any_pass]
    exists[any_pass, :k] = True
    accept[any_pass, :k] = passing[any_pass]
    none = ~any_pass
    hits[none, 0] = GHOST
    add[none, 0] = 0.0
    exists[none, 0] = True
    accept[none, 0] = True
    m = min(lam - 1, n)
    if m:
        hits[none, 1:1 + m] = order[none, :m]
        add[none, 1:1 + m] = vals[none, :m]
        exists[none, 1:1 + m] = True
    return hits, add, exists, accept


def enumerate_tree(seeds: SeedSet, event, cfg: FindConfig, kcfg=kalman.DEFAULT_KALMAN,
                   propagator=kalman.helix_propagator):
    """Replay all ``lam^(L-3)`` paths of every seed.

    Returns ``(seed_row, choices, vectors, chi2, m_ghost, q, alive)`` where
    ``alive`` marks the paths that survive the classical acceptance rules
    (gate, ghost and chi2 limits, lambda-best per seed at every layer).
    """
    L = event.n_layers
    lam = cfg.lam
    radii = event.geometry.layer_radii
    cap = cfg.cap(L)
    B = len(seeds)
    row = np.arange(B)
    choices = np.zeros((B, 0), dtype=np.int64)
    vec = np.full((B, L), GHOST, dtype=np.int64)
    vec[:, :3] = seeds.triplets
    p, C, chi2 = seeds.states.copy(), seeds.covs.copy(), seeds.chi2.copy()
    gh = np.zeros(B, dtype=np.int64)
    alive = np.ones(B, dtype=bool)
    exists = np.ones(B, dtype=bool)
    q = kalman.quality_score(2, gh, chi2, cfg.omega)
    for l in range(3, L):
        r_from, r_to = radii[l - 1], radii[l]
        P = len(row)
        p_pred, C_pred, m_pred, R, _, ok = kalman.predict_arrays(p, C, r_from, r_to, kcfg, propagator)
        with np.errstate(invalid="ignore"):
            ok &= kalman.condition_2x2(R) <= kalman.MAX_CONDITION
        ok &= exists
        meas = event.uv[l]
        c2 = np.full((P, len(meas)), np.inf)
        good = np.flatnonzero(ok)
        if len(meas) and len(good):
            c2[good] = kalman.chi2_arrays(m_pred[good], R[good], meas, r_to)
        hits, add, child_exists, accept = _fixed_width_slate(c2, lam, cfg.chi2_0)
        child_exists &= ok[:, None]
        parent = np.repeat(np.arange(P), lam)
        hit = hits.reshape(-1)
        new_chi2 = chi2[parent] + np.where(child_exists.reshape(-1), add.reshape(-1), 0.0)
        new_gh = gh[parent] + (hit == GHOST)
        new_alive = alive[parent] & accept.reshape(-1) & child_exists.reshape(-1)
        new_alive &= (new_gh <= cfg.max_ghosts) & (new_chi2 <= cap)
        new_vec = vec[parent].copy()
        new_vec[:, l] = hit
        new_q = kalman.quality_score(l, new_gh, new_chi2, cfg.omega)
        # lambda-best among the surviving siblings of each seed
        live = np.flatnonzero(new_alive)
        if len(live):
            order, rank = prune_order(seeds.ids[row[parent[live]]], new_vec[live], new_chi2[live],
                                      new_q[live], l)
            new_alive[live[order[rank >= lam]]] = False
        # advance every existing child so its descendants stay addressable
        ex = child_exists.reshape(-1)
        p_new = np.full((P * lam, 5), np.nan)
        C_new = np.full((P * lam, 5, 5), np.nan)
        ghost_child = ex & (hit == GHOST)
        p_new[ghost_child], C_new[ghost_child] = p_pred[parent[ghost_child]], C_pred[parent[ghost_child]]
        real = np.flatnonzero(ex & (hit != GHOST))
        if len(real):
            pr = parent[real]
            pf, Cf, _ = kalman.filter_arrays(p_pred[pr], C_pred[pr], R[pr], m_pred[pr], meas[hit[real]], r_to,
                                             kcfg.V)
            p_new[real], C_new[real] = pf, Cf
        choices = np.concatenate([choices[parent], np.tile(np.arange(lam), P)[:, None]], axis=1)
        row, vec, p, C = row[parent], new_vec, p_new, C_new
        chi2, gh, q, alive, exists = new_chi2, new_gh, new_q, new_alive, ex
    return row, choices, vec, chi2, gh, q, alive


def build_table(event, cfg: SuperpositionConfig = SuperpositionConfig(), seeds: SeedSet | None = None,
                kcfg=None) -> CandidateTable:
    """Score every candidate index of the space (stored sparsely over good seeds)."""
    pipe = cfg.pipeline
    kcfg = pipe.kalman if kcfg is None else kcfg
    fcfg = cfg.find
    L = event.n_layers
    if L < 4:
        raise ConfigError("superposition reconstruction needs at least four layers")
    n = max(event.count(l) for l in range(3))
    if seeds is None:
        seeds = generate_seeds(event, pipe.cuts, kcfg, fcfg.omega)
    row, choices, vec, chi2, gh, q, alive = enumerate_tree(seeds, event, fcfg, kcfg)
    t = seeds.triplets[row]
    seed_flat = (t[:, 0] * n + t[:, 1]) * n + t[:, 2]
    index = seed_flat.copy()
    for c in range(choices.shape[1]):
        index = index * cfg.lam + choices[:, c]
    valid = alive.copy()
    live = np.flatnonzero(alive)
    if len(live):
        probe = [TrackCandidate(tuple(vec[i].tolist()), None, None, float(chi2[i]), int(gh[i]), float(q[i]))
                 for i in live]
        q_sel, _, ok = smooth_candidates(probe, event, kcfg, fcfg.omega)
        valid[live] = ok & (q_sel >= pipe.threshold(L))
    return CandidateTable(n, cfg.lam, L - 3, index, vec, chi2, gh, q, valid, seeds.ids[row])


def enumerate_candidate(idx: CandidateIndex, event, cfg: SuperpositionConfig = SuperpositionConfig(),
                        forest: TupleForest | None = None, table: CandidateTable | None = None):
    """Deterministic replay of one candidate index. Returns ``(vector or None, score)``.

    ``vector`` is None for indices that do not address a tree node (a seed
    failing the cuts or a child beyond the available hits).
    """
    table = build_table(event, cfg) if table is None else table
    key = idx.encode(cfg.lam)
    rows = np.flatnonzero(table.index == key)
    if not len(rows):
        return None, INF
    r = int(rows[0])
    vector = tuple(table.vectors[r].tolist())
    if not table.valid[r]:
        return vector, INF
    if forest is not None and _forest_conflict(forest, table.vectors[r:r + 1], cfg.pipeline.f):
        return vector, INF
    return vector, -float(table.q[r])


def _forest_conflict(forest: TupleForest, vec_row: np.ndarray, f: float) -> bool:
    r = tuple_size(int(np.sum(vec_row[0] != GHOST)), f)
    keys = {rp: _bulk_keys(vec_row, rp)[0] for rp in range(1, min(r, vec_row.shape[1]) + 1)}
    return forest.conflicts(keys, r)


def repetitions(lam: int, n: int) -> int:
    """``ceil(log2(2 lam n^3))`` minimum-finding runs per round."""
    return int(math.ceil(math.log2(2 * lam * max(n, 1) ** 3)))


@dataclass
class SuperpositionResult:
    tracks: list[TrackCandidate]
    ledger: QueryLedger
    rounds: int
    table: CandidateTable
    forest: TupleForest


def reconstruct_superposition(event, cfg: SuperpositionConfig = SuperpositionConfig(), rng=None,
                              ledger: QueryLedger | None = None,
                              table: CandidateTable | None = None) -> SuperpositionResult:
    """Accept the best unmarked candidate per round until the minimum search finds nothing.

    Keys handed to the minimum search are ranks in the cleaning order
    (quality, then chi2, then hit sequence); they order candidates exactly as
    the scores ``-q`` do and break exact ties the same way the classical
    cleaner does.
    """
    rng = np.random.default_rng() if rng is None else rng
    ledger = QueryLedger() if ledger is None else ledger
    table = build_table(event, cfg) if table is None else table
    f = cfg.pipeline.f
    N = table.space_size
    weight = int(math.ceil(cfg.oracle_c * math.sqrt(table.n)))
    reps = repetitions(cfg.lam, table.n)

    rows = np.flatnonzero(table.valid)
    ordered = sorted(rows.tolist(), key=lambda i: table.candidate(i).sort_key())
    keys = np.full(N, INF)
    keys[table.index[ordered]] = np.arange(len(ordered), dtype=float)
    row_of = {int(table.index[i]): i for i in ordered}

    M = table.vectors[ordered] if ordered else np.zeros((0, event.n_layers), dtype=np.int64)
    real = M != GHOST
    n_real = real.sum(axis=1)
    live_idx = table.index[ordered] if ordered else np.zeros(0, dtype=np.int64)

    R = max([tuple_size(int(k), f) for k in n_real] or [1])
    forest = TupleForest(R, {tuple_size(int(k), f) for k in n_real} or None)
    out = []
    rounds = 0
    while True:
        rounds += 1
        best = None
        for _ in range(reps):
            j, _ = qsearch.durr_hoyer_min(keys, INF, rng, ledger, weight=weight, eps=cfg.epsilon)
            if j is not None and np.isfinite(keys[j]) and (best is None or keys[j] < keys[best]):
                best = j
        if best is None:
            break
        r = row_of[int(best)]
        vec = table.vectors[r:r + 1]
        if _forest_conflict(forest, vec, f):
            raise AssertionError("accepted a candidate that conflicts with the forest")
        nr = int(np.sum(vec[0] != GHOST))
        rt = tuple_size(nr, f)
        forest.insert({rp: _bulk_keys(vec, rp)[0] for rp in range(1, min(rt, vec.shape[1]) + 1)}, rt)
        out.append(table.candidate(r))
        # mark every candidate that now overlaps the forest
        shared = np.count_nonzero((M == vec[0]) & real, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            clash = shared / np.minimum(n_real, nr) > f
        keys[live_idx[clash]] = INF
        keys[best] = INF
    return SuperpositionResult(out, ledger, rounds, table, forest)


def modified_reference(event, cfg: SuperpositionConfig = SuperpositionConfig(),
                       table: CandidateTable | None = None) -> list[TrackCandidate]:
    """Classical counterpart: greedy r-tuple cleaning of all finite-score candidates."""
    table = build_table(event, cfg) if table is None else table
    return clean_improved(table.valid_candidates(), cfg.pipeline.f)


def greedy_masking(cands) -> list[TrackCandidate]:
    """Take the best candidate, drop everything sharing a real hit with it, repeat."""
    out, used = [], set()
    for c in sort_candidates(cands):
        hits = set(c.real_hits())
        if hits & used:
            continue
        out.append(c)
        used |= hits
    return out
