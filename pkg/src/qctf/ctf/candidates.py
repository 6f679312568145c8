"""Track candidates and the total order used for pruning, cleaning and selection."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ..errors import DataError

GHOST = -1


@dataclass
class TrackCandidate:
    """One candidate: a hit index (or ``GHOST``) per layer plus the filter state."""

    vector: tuple[int, ...]
    state: np.ndarray | None = None
    cov: np.ndarray | None = None
    chi2_total: float = 0.0
    m_ghost: int = 0
    q: float = 0.0
    seed_id: int = -1

    def __post_init__(self):
        self.vector = tuple(int(j) for j in self.vector)
        ghosts = sum(1 for j in self.vector if j == GHOST)
        if ghosts != self.m_ghost:
            raise ValueError(f"m_ghost={self.m_ghost} but the hit vector holds {ghosts} ghosts")

    @property
    def hits(self) -> list[tuple[int, int]]:
        return list(enumerate(self.vector))

    @property
    def n_layers(self) -> int:
        return len(self.vector)

    @property
    def n_real(self) -> int:
        return len(self.vector) - self.m_ghost

    def real_hits(self) -> list[tuple[int, int]]:
        return [(l, j) for l, j in enumerate(self.vector) if j != GHOST]

    def sort_key(self):
        return (-self.q, self.chi2_total, self.vector)

    def with_quality(self, q: float, chi2_total: float) -> "TrackCandidate":
        return replace(self, q=float(q), chi2_total=float(chi2_total))


def sort_candidates(cands):
    """Quality descending, then chi2 ascending, then the hit sequence (ghost first)."""
    return sorted(cands, key=TrackCandidate.sort_key)


def tracks_to_json(cands) -> list[dict]:
    return [{
        "seed_id": int(c.seed_id),
        "hits": [[l, "ghost" if j == GHOST else int(j)] for l, j in c.hits],
        "chi2_total": float(c.chi2_total),
        "m_ghost": int(c.m_ghost),
        "quality": float(c.q),
    } for c in cands]


def tracks_from_json(items) -> list[TrackCandidate]:
    if not isinstance(items, list):
        raise TypeError("a track file holds a JSON list of tracks")
    out = []
    for d in items:
        hits = sorted(d["hits"], key=lambda h: h[0])
        vec = [GHOST if j == "ghost" else int(j) for _, j in hits]
        out.append(TrackCandidate(vec, None, None, float(d["chi2_total"]), int(d["m_ghost"]),
                                  float(d["quality"]), int(d.get("seed_id", -1))))
    return out


def tracks_to_csv(cands) -> str:
    rows = ["track,seed_id,layer,j,chi2_total,m_ghost,quality"]
    for t, c in enumerate(cands):
        for l, j in c.hits:
            rows.append("%d,%d,%d,%s,%.17g,%d,%.17g" % (t, c.seed_id, l, "ghost" if j == GHOST else j,
                                                       c.chi2_total, c.m_ghost, c.q))
    return "\n".join(rows) + "\n"


def tracks_from_csv(text: str) -> list[TrackCandidate]:
    groups: dict[int, dict] = {}
    for row in csv.DictReader(io.StringIO(text)):
        g = groups.setdefault(int(row["track"]), {"seed_id": int(row["seed_id"]), "hits": [],
                                                   "chi2_total": row["chi2_total"], "m_ghost": row["m_ghost"],
                                                   "quality": row["quality"]})
        g["hits"].append([int(row["layer"]), row["j"] if row["j"] == "ghost" else int(row["j"])])
    return tracks_from_json([groups[t] for t in sorted(groups)])


def save_tracks(cands, path) -> None:
    path = Path(path)
    text = tracks_to_csv(cands) if path.suffix == ".csv" else json.dumps(tracks_to_json(cands))
    path.write_text(text)


def load_tracks(path) -> list[TrackCandidate]:
    path = Path(path)
    text = path.read_text()
    try:
        if path.suffix == ".csv":
            return tracks_from_csv(text)
        return tracks_from_json(json.loads(text))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed track file {path}: {exc}") from exc
