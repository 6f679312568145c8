"""Duplicate removal: the quadratic pairwise scan and the r-tuple forest."""

from __future__ import annotations

from itertools import combinations
from math import comb

import numpy as np
from sortedcontainers import SortedSet

from .candidates import GHOST, TrackCandidate, sort_candidates
from .stats import StageStats

BLANK = -1


def tuple_size(n_real: int, f: float) -> int:
    """Smallest number of shared hits ``s`` with ``s / n_real > f``.

    Two tracks conflict iff they share at least ``min(r_1, r_2)`` real hits,
    which is the same statement as ``shared / min(N_1, N_2) > f``.
    """
    if n_real <= 0:
        return 1
    r = int(np.floor(f * n_real)) + 1
    while r > 1 and (r - 1) / n_real > f:
        r -= 1
    while not r / n_real > f:
        r += 1
    return r


def shares_too_much(a, b, f: float) -> bool:
    a, b = np.asarray(a), np.asarray(b)
    na, nb = int(np.sum(a != GHOST)), int(np.sum(b != GHOST))
    shared = int(np.sum((a == b) & (a != GHOST)))
    return shared / min(na, nb) > f


def r_tuples(track_vector, r: int, ghost_sentinel: int | None = None) -> list[tuple[int, ...]]:
    """All ``binom(L, r)`` keys that agree with the track at ``r`` positions.

    Ghost entries are replaced by ``ghost_sentinel`` (a value unique to the
    track, below ``BLANK``) so that they never match another track.
    """
    v = [int(j) for j in track_vector]
    L = len(v)
    if not 1 <= r <= L:
        raise ValueError(f"r must lie in [1, {L}]")
    sentinel = BLANK - 1 if ghost_sentinel is None else ghost_sentinel
    if sentinel >= BLANK:
        raise ValueError("ghost sentinel must sort below BLANK")
    vals = [sentinel if j == GHOST else j for j in v]
    out = []
    for pos in combinations(range(L), r):
        key = [BLANK] * L
        for p in pos:
            key[p] = vals[p]
        out.append(tuple(key))
    return out


def clean_original(cands, f: float = 0.5, stats: StageStats | None = None) -> list[TrackCandidate]:
    """Pairwise scan; ``cands`` must already be in processing (quality) order.

    Track ``i`` removes every later surviving track that shares too many hits
    with it.  Returns the survivors in input order.
    """
    if not 0 < f <= 1:
        raise ValueError("f must lie in (0, 1]")
    cands = list(cands)
    k = len(cands)
    if k == 0:
        return []
    M = np.array([c.vector for c in cands], dtype=np.int64)
    real = M != GHOST
    N = real.sum(axis=1)
    alive = np.ones(k, dtype=bool)
    comparisons = 0
    for i in range(k - 1):
        if not alive[i]:
            continue
        js = i + 1 + np.flatnonzero(alive[i + 1:])
        if not len(js):
            break
        comparisons += len(js)
        shared = np.count_nonzero((M[js] == M[i]) & real[i], axis=1)
        conflict = shared / np.minimum(N[js], N[i]) > f
        alive[js[conflict]] = False
    if stats is not None:
        stats.clean_ops += comparisons
        stats.k_clean += int(alive.sum())
    return [c for c, a in zip(cands, alive) if a]


class TupleForest:
    """Sets ``T[i][j]`` of r-tuples, following the two-case lookup.

    ``T[r', r]`` holds the r'-tuples of accepted tracks whose own size is r.
    A new track of size r conflicts with an accepted track of size r1 iff
    (a) r1 <= r and one of its r1-tuples is in ``T[r1, r1]``, or
    (b) r1 > r and one of its r-tuples is in ``T[r, r1]``.

    Only the first index of a tree is ever a tuple size that some candidate
    has, so ``levels`` (the sizes that occur) limits which r'-tuples are
    stored.  Every query is a membership test; hash sets answer them fastest,
    and ``ordered=True`` swaps in balanced sorted sets with the same results.
    """

    def __init__(self, R: int, levels=None, ordered: bool = False):
        self.R = R
        self.levels = sorted(set(range(1, R + 1) if levels is None else levels))
        make = SortedSet if ordered else set
        self.trees = [[make() for _ in range(R + 1)] for _ in range(R + 1)]
        self.ops = 0

    @property
    def size(self) -> int:
        return sum(len(t) for row in self.trees for t in row)

    def _hit(self, tree, keys) -> bool:
        if tree.isdisjoint(keys):
            self.ops += len(keys)
            return False
        for i, key in enumerate(keys):
            if key in tree:
                self.ops += i + 1
                return True
        raise AssertionError("unreachable")

    def conflicts(self, keys_by_r: dict[int, list], r: int) -> bool:
        trees = self.trees
        for rp in self.levels:
            if rp > min(r, self.R):
                break
            if trees[rp][rp] and self._hit(trees[rp][rp], keys_by_r.get(rp, ())):
                return True
        if r <= self.R:
            keys = keys_by_r.get(r, ())
            for rp in range(r + 1, self.R + 1):
                if trees[r][rp] and self._hit(trees[r][rp], keys):
                    return True
        return False

    def insert(self, keys_by_r: dict[int, list], r: int) -> None:
        r = min(r, self.R)
        for rp in self.levels:
            if rp > r:
                break
            keys = keys_by_r.get(rp, ())
            self.ops += len(keys)
            self.trees[rp][r].update(keys)


_COMBOS: dict[tuple[int, int], np.ndarray] = {}


def _combos(L: int, r: int) -> np.ndarray:
    c = _COMBOS.get((L, r))
    if c is None:
        c = np.array(list(combinations(range(L), r)), dtype=np.int64).reshape(-1, r)
        _COMBOS[(L, r)] = c
    return c


def _bulk_keys(M: np.ndarray, r: int) -> list[list[tuple]]:
    """Real-hit r-tuples of every row of ``M``.

    Keys through a ghost slot are skipped: with a per-track sentinel they
    could never match, so leaving them out changes no lookup result.
    Each key is packed into a fixed-width big-endian byte string, which
    compares much faster than a tuple and is equally exact.
    """
    k, L = M.shape
    if r > L:
        return [[] for _ in range(k)]
    combos = _combos(L, r)
    keys = np.full((k, len(combos), L), BLANK, dtype=np.int64)
    keys[:, np.arange(len(combos))[:, None], combos] = M[:, combos]
    valid = np.all(M[:, combos] != GHOST, axis=2)
    packed = (keys - BLANK).astype(">u4").view(f"S{4 * L}")[..., 0]
    flat = packed[valid].tolist()
    bounds = np.r_[0, np.cumsum(valid.sum(axis=1))].tolist()
    return [flat[a:b] for a, b in zip(bounds[:-1], bounds[1:])]


def clean_improved(cands, f: float = 0.5, stats: StageStats | None = None,
                   forest: TupleForest | None = None, sorted_sets: bool = False) -> list[TrackCandidate]:
    """Greedy cleaning in quality order with r-tuple lookups instead of pair scans."""
    if not 0 < f <= 1:
        raise ValueError("f must lie in (0, 1]")
    ordered = sort_candidates(cands)
    if not ordered:
        return []
    M = np.array([c.vector for c in ordered], dtype=np.int64)
    L = M.shape[1]
    N = (M != GHOST).sum(axis=1)
    r_of = np.array([tuple_size(int(n), f) for n in N])
    R = int(r_of.max())
    if forest is None:
        forest = TupleForest(R, set(r_of.tolist()), sorted_sets)
    by_r = {rp: _bulk_keys(M, rp) for rp in forest.levels if rp <= L}
    out = []
    for i, c in enumerate(ordered):
        r = int(r_of[i])
        keys = {rp: by_r[rp][i] for rp in by_r if rp <= r}
        if forest.conflicts(keys, r):
            continue
        forest.insert(keys, r)
        out.append(c)
    if stats is not None:
        stats.clean_ops += forest.ops
        stats.k_clean += len(out)
    return out


def forest_compatible(cands, f: float) -> bool:
    """No pair of tracks shares too many real hits."""
    vecs = [c.vector if isinstance(c, TrackCandidate) else tuple(c) for c in cands]
    for a in range(len(vecs)):
        for b in range(a + 1, len(vecs)):
            if shares_too_much(vecs[a], vecs[b], f):
                return False
    return True


def expected_forest_size(n_real: int, f: float) -> int:
    """Keys stored per accepted track when every candidate has ``n_real`` real hits."""
    return comb(n_real, tuple_size(n_real, f))
