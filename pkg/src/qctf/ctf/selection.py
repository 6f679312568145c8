"""Final refit and quality cut."""

from __future__ import annotations

import logging

import numpy as np

from .. import kalman
from ..kalman import DEFAULT_KALMAN, KalmanConfig
from .candidates import GHOST, TrackCandidate
from .stats import StageStats

log = logging.getLogger(__name__)


def default_threshold(n_layers: int, omega: float = 1.0, chi2_cut: float | None = None) -> float:
    """``(L-1) - 1 - omega * chi2_cut``: tolerates one ghost and a chi2 of ``chi2_cut``.

    The default ``chi2_cut`` is three per degree of freedom of the refit.
    """
    if chi2_cut is None:
        chi2_cut = 3.0 * (2 * n_layers - 5)
    return (n_layers - 1) - 1 - omega * chi2_cut


def smooth_candidates(cands, event, cfg: KalmanConfig = DEFAULT_KALMAN, omega: float = 1.0,
                      propagator=kalman.helix_propagator):
    """Batched refit of full-length candidates. Returns (quality, chi2, ok) arrays."""
    k = len(cands)
    L = event.n_layers
    if k == 0:
        return np.zeros(0), np.zeros(0), np.zeros(0, dtype=bool)
    M = np.array([c.vector for c in cands], dtype=np.int64)
    if M.shape[1] != L:
        raise ValueError("candidates must carry one entry per detector layer")
    pts = [event.layers[l][M[:, l]] for l in range(3)]
    state, chi2_seed, _ = kalman.fit_triplets(*pts, cfg.sigma_v)
    cov = kalman.triplet_covariance(*pts, cfg)
    ghost = M[:, 3:] == GHOST
    uv = np.zeros((k, L - 3, 2))
    for c, l in enumerate(range(3, L)):
        real = ~ghost[:, c]
        uv[real, c] = event.uv[l][M[real, l]]
    chi2, ok = kalman.smooth_batch(state, cov, chi2_seed, uv, ghost, event.geometry.layer_radii, cfg,
                                   propagator)
    m_ghost = ghost.sum(axis=1)
    q = kalman.quality_score(L - 1, m_ghost, chi2, omega)
    return q, chi2, ok


def select_tracks(cands, quality_threshold: float, event, cfg: KalmanConfig = DEFAULT_KALMAN,
                  omega: float = 1.0, stats: StageStats | None = None, chunk: int = 1 << 15):
    """Refit every candidate and keep those whose refit quality reaches the threshold.

    Returned candidates carry the refit quality and chi2.
    """
    cands = list(cands)
    out = []
    for start in range(0, len(cands), chunk):
        part = cands[start:start + chunk]
        q, chi2, ok = smooth_candidates(part, event, cfg, omega)
        if not np.all(ok):
            log.warning("dropping %d candidates whose refit is numerically singular", int((~ok).sum()))
        for c, qi, ci, good in zip(part, q, chi2, ok):
            if good and qi >= quality_threshold:
                out.append(c.with_quality(qi, ci))
    if stats is not None:
        stats.select_ops += len(cands)
        stats.k_select += len(out)
    return out
