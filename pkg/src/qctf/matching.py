"""Truth matching of reconstructed tracks."""

from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass

import numpy as np

from .ctf.candidates import GHOST, sort_candidates
from .errors import NoTruth

DEFAULT_MIN_FRACTION = 0.75


@dataclass(frozen=True)
class MatchReport:
    efficiency: float
    fake_rate: float
    n_tracks: int
    n_particles: int
    n_matched: int
    min_fraction: float

    def to_dict(self) -> dict:
        return asdict(self)


def match_truth(tracks, event, min_fraction: float = DEFAULT_MIN_FRACTION) -> MatchReport:
    """Greedy one-to-one matching in quality order.

    A track matches the particle owning at least ``min_fraction`` of its real
    hits, provided no better track has claimed that particle already.  The
    efficiency counts particles that left at least one hit.
    """
    if not event.has_truth:
        raise NoTruth("event carries no truth record")
    if not 0 < min_fraction <= 1:
        raise ValueError("min_fraction must lie in (0, 1]")
    owners = event.hit_particle
    present = set(np.unique(np.concatenate([o for o in owners] or [np.zeros(0, dtype=np.int64)])).tolist())
    present.discard(-1)
    claimed = set()
    for t in sort_candidates(tracks):
        ids = [int(owners[l][j]) for l, j in enumerate(t.vector) if j != GHOST]
        if not ids:
            continue
        pid, hits = Counter(ids).most_common(1)[0]
        if pid >= 0 and pid not in claimed and hits / len(ids) >= min_fraction:
            claimed.add(pid)
    n_tracks = len(tracks)
    eff = len(claimed) / len(present) if present else 0.0
    fake = (n_tracks - len(claimed)) / n_tracks if n_tracks else 0.0
    return MatchReport(eff, fake, n_tracks, len(present), len(claimed), min_fraction)
