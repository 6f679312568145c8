"""Triplet seeding over the three innermost layers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import kalman
from ..kalman import DEFAULT_KALMAN, KalmanConfig
from .stats import StageStats


@dataclass(frozen=True)
class SeedCuts:
    """Acceptance window on the fitted helix.

    ``min_pt`` bounds the radius of curvature from below (``|1/kappa| >= min_pt``).
    """

    min_pt: float = 50.0
    max_d0: float = 0.5
    max_z0: float = 10.0

    def __post_init__(self):
        if self.min_pt < 0 or self.max_d0 <= 0 or self.max_z0 <= 0:
            raise ValueError("seed cuts must be positive")

    @classmethod
    def disabled(cls) -> "SeedCuts":
        return cls(0.0, math.inf, math.inf)

    @property
    def is_disabled(self) -> bool:
        return self.min_pt == 0 and math.isinf(self.max_d0) and math.isinf(self.max_z0)

    def accept(self, helix_params) -> np.ndarray:
        h = np.asarray(helix_params, dtype=float)
        if self.is_disabled:
            return np.ones(h.shape[:-1], dtype=bool)
        finite = np.all(np.isfinite(h), axis=-1)
        with np.errstate(invalid="ignore"):
            return (finite & (np.abs(h[..., 4]) * self.min_pt <= 1.0)
                    & (np.abs(h[..., 0]) <= self.max_d0) & (np.abs(h[..., 1]) <= self.max_z0))


# tight prompt window used with bundled test events: only same-bundle triplets pass
PROMPT_CUTS = SeedCuts(min_pt=1000.0, max_d0=0.02, max_z0=0.5)


def outward(p0, p1, p2) -> np.ndarray:
    """Hits met in order by a track moving away from the beam line."""
    d01 = p1[..., :2] - p0[..., :2]
    d12 = p2[..., :2] - p1[..., :2]
    return (np.einsum("...i,...i->...", d01, p0[..., :2]) > 0) & (np.einsum("...i,...i->...", d12, p1[..., :2]) > 0)


@dataclass
class Seed:
    triplet: tuple[int, int, int]
    init_state: np.ndarray
    init_cov: np.ndarray
    q2: float
    chi2: float
    seed_id: int


class SeedSet:
    """Columnar store of seeds; indexes and iterates as a list of :class:`Seed`."""

    def __init__(self, triplets, states, covs, chi2, omega: float = 1.0):
        self.triplets = np.asarray(triplets, dtype=np.int64).reshape(-1, 3)
        self.states = np.asarray(states, dtype=float).reshape(-1, 5)
        self.covs = np.asarray(covs, dtype=float).reshape(-1, 5, 5)
        self.chi2 = np.asarray(chi2, dtype=float).reshape(-1)
        self.omega = omega
        self.ids = np.arange(len(self.triplets))

    @property
    def q2(self) -> np.ndarray:
        return kalman.quality_score(2, 0, self.chi2, self.omega)

    def __len__(self) -> int:
        return len(self.triplets)

    def __getitem__(self, i) -> Seed:
        return Seed(tuple(int(j) for j in self.triplets[i]), self.states[i], self.covs[i],
                    float(self.q2[i]), float(self.chi2[i]), int(self.ids[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def subset(self, index) -> "SeedSet":
        out = SeedSet(self.triplets[index], self.states[index], self.covs[index], self.chi2[index], self.omega)
        out.ids = self.ids[index]
        return out

    def triplet_set(self) -> set[tuple[int, int, int]]:
        return {tuple(t) for t in self.triplets.tolist()}

    @classmethod
    def empty(cls, omega: float = 1.0) -> "SeedSet":
        return cls(np.zeros((0, 3)), np.zeros((0, 5)), np.zeros((0, 5, 5)), np.zeros(0), omega)


def fit_flat(event, flat, cfg: KalmanConfig = DEFAULT_KALMAN):
    """Fit the triplets named by flat indices ``(j0*n1 + j1)*n2 + j2``."""
    n1, n2 = event.count(1), event.count(2)
    j0, rem = np.divmod(np.asarray(flat, dtype=np.int64), n1 * n2)
    j1, j2 = np.divmod(rem, n2)
    pts = [event.layers[0][j0], event.layers[1][j1], event.layers[2][j2]]
    state, chi2, hp = kalman.fit_triplets(*pts, cfg.sigma_v)
    return np.stack([j0, j1, j2], axis=-1), pts, state, chi2, hp


def build_seeds(event, triplets, cfg: KalmanConfig = DEFAULT_KALMAN, omega: float = 1.0) -> SeedSet:
    """Fit and package an explicit list of triplets (no cuts applied)."""
    triplets = np.asarray(triplets, dtype=np.int64).reshape(-1, 3)
    if not len(triplets):
        return SeedSet.empty(omega)
    pts = [event.layers[k][triplets[:, k]] for k in range(3)]
    state, chi2, _ = kalman.fit_triplets(*pts, cfg.sigma_v)
    cov = kalman.triplet_covariance(*pts, cfg)
    return SeedSet(triplets, state, cov, chi2, omega)


def generate_seeds(event, cuts: SeedCuts = SeedCuts(), cfg: KalmanConfig = DEFAULT_KALMAN,
                   omega: float = 1.0, stats: StageStats | None = None, chunk: int = 1 << 17) -> SeedSet:
    """Every triplet of layers 0/1/2 whose fitted helix passes ``cuts``, in (j0, j1, j2) order."""
    n0, n1, n2 = (event.count(l) for l in range(3))
    total = n0 * n1 * n2
    keep_trip, keep_state, keep_chi2, keep_pts = [], [], [], []
    for start in range(0, total, chunk):
        flat = np.arange(start, min(total, start + chunk))
        trip, pts, state, chi2, hp = fit_flat(event, flat, cfg)
        ok = cuts.accept(hp) & np.all(np.isfinite(state), axis=-1)
        if not cuts.is_disabled:
            ok &= outward(*pts)
        keep_trip.append(trip[ok])
        keep_state.append(state[ok])
        keep_chi2.append(chi2[ok])
        keep_pts.append([p[ok] for p in pts])
    if stats is not None:
        stats.seed_ops += total
    if not keep_trip:
        seeds = SeedSet.empty(omega)
    else:
        covs = [kalman.triplet_covariance(*p, cfg) for p in keep_pts]
        seeds = SeedSet(np.concatenate(keep_trip), np.concatenate(keep_state),
                        np.concatenate(covs), np.concatenate(keep_chi2), omega)
    if stats is not None:
        stats.k_seed += len(seeds)
    return seeds
