"""Outcome-distribution simulation of Grover-family search with query accounting.

Grover iterations from the uniform state with a phase oracle stay in the
plane spanned by the uniform marked and unmarked states, so a measurement
after ``m`` iterations returns a marked index with probability
``sin^2((2m+1) theta)`` and is uniform within each class.  The simulators below
sample from exactly that law and charge the ledger instead of evolving a
state vector.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import EmptySpace

BBHT_GROWTH = 6 / 5
BBHT_CUTOFF = 8.0          # t = 0 gives up after this many sqrt(N) charged queries
DH_BUDGET = 22.5
COUNT_PRECISION = 6.0      # register size, in units of pi sqrt(k (N-k)), before counts are trusted


@dataclass
class QueryLedger:
    """Monotone query counters.

    ``oracle_calls`` counts Grover iterations; ``cost`` is the same count
    weighted by the per-call price (1 unless a caller prices its oracle).
    """

    oracle_calls: int = 0
    diffusion_calls: int = 0
    classical_verifications: int = 0
    cost: int = 0

    def charge(self, iterations: int, weight: int = 1) -> None:
        if iterations < 0 or weight < 0:
            raise ValueError("charges must be non-negative")
        self.oracle_calls += iterations
        self.diffusion_calls += iterations
        self.cost += iterations * weight

    def verify(self, count: int = 1) -> None:
        self.classical_verifications += count

    def snapshot(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.snapshot())

    def __sub__(self, other: "QueryLedger") -> "QueryLedger":
        return QueryLedger(*(a - b for a, b in zip(asdict(self).values(), asdict(other).values())))

    def copy(self) -> "QueryLedger":
        return QueryLedger(**asdict(self))


class SearchSpace:
    """Index space ``[0, N)`` with a marked subset.

    Built from a boolean mask (or a vectorized predicate evaluated once for
    the simulation's bookkeeping; those evaluations are not oracle queries).
    """

    def __init__(self, N: int, marked=None, key=None):
        self.N = int(N)
        if self.N < 0:
            raise ValueError("N must be non-negative")
        if callable(marked):
            marked = np.asarray(marked(np.arange(self.N)), dtype=bool)
        self._mask = None if marked is None else np.asarray(marked, dtype=bool)
        if self._mask is not None and self._mask.shape != (self.N,):
            raise ValueError("marked mask must have length N")
        self._marked = np.flatnonzero(self._mask) if self._mask is not None else np.zeros(0, dtype=np.int64)
        self.key = None if key is None else np.asarray(key, dtype=float)

    @property
    def t(self) -> int:
        return len(self._marked)

    def is_marked(self, i: int) -> bool:
        return bool(self._mask is not None and self._mask[i])

    def sample_marked(self, rng) -> int:
        return int(self._marked[rng.integers(self.t)])

    def sample_unmarked(self, rng) -> int:
        if self.t == 0:
            return int(rng.integers(self.N))
        if self.t <= self.N // 2:
            while True:
                i = int(rng.integers(self.N))
                if not self._mask[i]:
                    return i
        rest = np.flatnonzero(~self._mask)
        return int(rest[rng.integers(len(rest))])


class ThresholdSpace:
    """Marked set ``{j : key[j] < y}`` over a fixed key array, sampled in O(log N)."""

    def __init__(self, keys, y: float):
        self._sorted_keys, self._order = _sorted(keys)
        self.N = len(self._order)
        self.y = y
        self._t = int(np.searchsorted(self._sorted_keys, y, side="left"))

    @classmethod
    def from_sorted(cls, sorted_keys, order, y):
        obj = cls.__new__(cls)
        obj._sorted_keys, obj._order, obj.N, obj.y = sorted_keys, order, len(order), y
        obj._t = int(np.searchsorted(sorted_keys, y, side="left"))
        return obj

    @property
    def t(self) -> int:
        return self._t

    def is_marked(self, i: int) -> bool:
        raise NotImplementedError("use key_of for threshold spaces")

    def sample_marked(self, rng) -> int:
        return int(self._order[rng.integers(self._t)])

    def sample_unmarked(self, rng) -> int:
        return int(self._order[self._t + rng.integers(self.N - self._t)])


def _sorted(keys):
    keys = np.asarray(keys, dtype=float)
    order = np.argsort(keys, kind="stable")
    return keys[order], order


def grover_angle(N: int, t: int) -> float:
    if N < 1 or not 0 <= t <= N:
        raise ValueError("need N >= 1 and 0 <= t <= N")
    return math.asin(math.sqrt(t / N))


def grover_iterations(N: int, t: int) -> int:
    """``floor(pi / (4 theta))``, the iteration count of a single Grover run."""
    theta = grover_angle(N, t)
    return 0 if theta == 0 else int(math.floor(math.pi / (4 * theta)))


def grover_success_prob(N: int, t: int, m: int) -> float:
    if t == 0:
        return 0.0
    theta = grover_angle(N, t)
    return math.sin((2 * m + 1) * theta) ** 2


def grover_sample(space, m: int, rng, ledger: QueryLedger | None = None, weight: int = 1,
                  eps: float = 0.0) -> int:
    """Measure after ``m`` Grover iterations; charges ``m`` oracle calls.

    ``eps`` is the probability that the prepared state is wrong, in which
    case the outcome comes from the unmarked class.
    """
    if space.N == 0:
        raise EmptySpace("cannot search an empty space")
    if ledger is not None:
        ledger.charge(m, weight)
    t = space.t
    if eps and t < space.N and rng.random() < eps:
        return space.sample_unmarked(rng)
    if t == space.N:
        return space.sample_marked(rng)
    if t == 0:
        return space.sample_unmarked(rng)
    if rng.random() < grover_success_prob(space.N, t, m):
        return space.sample_marked(rng)
    return space.sample_unmarked(rng)


def exponential_search(space, rng, ledger: QueryLedger | None = None, limit: float | None = None,
                       is_marked=None, weight: int = 1, eps: float = 0.0):
    """BBHT search with unknown marked count.

    Returns ``(index or None, charged)``.  The search stops on the first
    classically verified marked sample or once ``limit`` queries (default
    ``8 sqrt(N)``) are spent; the last Grover run is shortened so that the
    limit is never exceeded.
    """
    N = space.N
    if N == 0:
        raise EmptySpace("cannot search an empty space")
    check = space.is_marked if is_marked is None else is_marked
    limit = BBHT_CUTOFF * math.sqrt(N) if limit is None else limit
    cap = math.sqrt(N)
    if space.t == 0:
        return None, _exhaust(rng, ledger, limit, cap, weight)
    M = 1.0
    spent = 0
    for _ in range(int(math.ceil(limit)) + 2):
        room = int(math.floor(limit - spent))
        if room < 0:
            break
        j = min(int(rng.integers(int(math.ceil(M)))), room)
        i = grover_sample(space, j, rng, ledger, weight, eps)
        spent += j
        if ledger is not None:
            ledger.verify()
        if check(i):
            return i, spent
        M = min(BBHT_GROWTH * M, cap)
        if spent >= limit:
            break
    return None, spent


def _exhaust(rng, ledger, limit, cap, weight):
    """Exponential search over a space with nothing marked: every measurement fails."""
    M = 1.0
    spent = 0
    rounds = 0
    for _ in range(int(math.ceil(limit)) + 2):
        room = int(math.floor(limit - spent))
        if room < 0:
            break
        spent += min(int(rng.integers(int(math.ceil(M)))), room)
        rounds += 1
        M = min(BBHT_GROWTH * M, cap)
        if spent >= limit:
            break
    if ledger is not None:
        ledger.charge(spent, weight)
        ledger.verify(rounds)
    return spent


def dh_budget(N: int) -> int:
    return int(math.ceil(DH_BUDGET * math.sqrt(N)))


def durr_hoyer_min(keys, chi2_0: float, rng, ledger: QueryLedger | None = None, weight: int = 1,
                   budget: int | None = None, eps: float = 0.0):
    """Threshold-descent minimum finding.

    Repeats exponential search for an index with key below the running
    threshold (initially ``chi2_0``) until ``ceil(22.5 sqrt(N))`` queries are
    spent.  Returns ``(index or None, charged)``; ``None`` means no key below
    ``chi2_0`` was found.
    """
    keys = np.asarray(keys, dtype=float)
    N = len(keys)
    if N == 0:
        raise EmptySpace("cannot search an empty space")
    budget = dh_budget(N) if budget is None else budget
    sorted_keys, order = _sorted(keys)
    y = chi2_0
    best = None
    spent = 0
    while spent < budget:
        space = ThresholdSpace.from_sorted(sorted_keys, order, y)
        i, c = exponential_search(space, rng, ledger, limit=min(BBHT_CUTOFF * math.sqrt(N), budget - spent),
                                  is_marked=lambda j, y=y: keys[j] < y, weight=weight, eps=eps)
        spent += c
        if i is not None:
            best, y = i, keys[i]
        elif c == 0:
            break
    return best, spent


# -- quantum counting -----------------------------------------------------------

_FULL_KERNEL = 1 << 16
_WINDOW = 64


def _fejer(delta, M):
    """|sum_k exp(2 pi i k delta)|^2 / M^2 for a register of size M."""
    delta = np.asarray(delta, dtype=float)
    s = np.sin(np.pi * delta)
    with np.errstate(invalid="ignore", divide="ignore"):
        val = np.sin(np.pi * M * delta) ** 2 / (M * M * s * s)
    return np.where(np.abs(s) < 1e-15, 1.0, val)


def sample_phase(omega: float, M: int, rng) -> int:
    """Outcome of phase estimation with ``M`` register states for eigenphase ``omega`` (turns)."""
    x0 = (M * omega) % M
    if abs(x0 - round(x0)) < 1e-12:
        return int(round(x0)) % M
    if M <= _FULL_KERNEL:
        y = np.arange(M)
        p = _fejer(omega - y / M, M)
        return int(rng.choice(M, p=p / p.sum()))
    yc = int(round(x0))
    offs = np.arange(-_WINDOW, _WINDOW + 1)
    p = _fejer(omega - (yc + offs) / M, M)
    inside = p.sum()
    if rng.random() < inside:
        return int((yc + offs[rng.choice(len(offs), p=p / inside)]) % M)
    # tail: proposal d = floor(X) + 1 with X ~ K/x^2 on [K, inf), side uniform;
    # kernel <= 1/(4 (d - 1/2)^2) there, so acceptance is 4 d (d-1) F
    half = M // 2
    neg_half = half - 1 if M % 2 == 0 else half
    while True:
        d = int(math.floor(_WINDOW / (1.0 - rng.random()))) + 1
        side = 1 if rng.random() < 0.5 else -1
        if d > (half if side > 0 else neg_half):
            continue
        y = yc + side * d
        f = float(_fejer(omega - y / M, M))
        if rng.random() < 4.0 * d * (d - 1) * f:
            return int(y % M)


def count_estimate(N: int, t: int, M: int, rng) -> int:
    """One phase-estimation round of the Grover rotation, mapped back to a count."""
    theta = grover_angle(N, t)
    omega = theta / math.pi
    if 0 < t < N and rng.random() < 0.5:
        omega = -omega
    y = sample_phase(omega % 1.0, M, rng)
    return int(round(N * math.sin(math.pi * y / M) ** 2))


def quantum_count(space, rng, ledger: QueryLedger | None = None, weight: int = 1, max_register: int = 1 << 28):
    """Estimate the marked count by phase estimation with a doubling register.

    The register starts at ``ceil(sqrt(N))`` rounded up to a multiple of 4 and
    doubles until two consecutive rounds give the same integer ``k`` and the
    register resolves counts near ``k`` to better than one unit
    (``M >= PRECISION * pi * sqrt(k (N - k))``).  Each round with register size
    ``M`` charges ``M`` oracle calls.
    """
    N = space.N
    if N == 0:
        raise EmptySpace("cannot count an empty space")
    t = space.t
    M = 4 * int(math.ceil(math.ceil(math.sqrt(N)) / 4))
    prev = None
    while True:
        if ledger is not None:
            ledger.charge(M, weight)
        est = count_estimate(N, t, M, rng)
        settled = M >= COUNT_PRECISION * math.pi * math.sqrt(est * (N - est))
        if (est == prev and settled) or M >= max_register:
            return est
        prev = est
        M *= 2
