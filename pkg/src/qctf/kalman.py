"""Kalman filter, smoother and triplet fit on the local layer state.

State vector ``p = (phi, z, beta, cot_theta, kappa)`` lives on a cylinder of
known radius ``R``; the measurement is ``m = (R*phi, z)`` so that
``H = [[R,0,0,0,0],[0,1,0,0,0]]``.  Every array function accepts leading batch
dimensions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import helix
from .errors import NonFinite, SingularResidualCov
from .helix import wrap_angle

log = logging.getLogger(__name__)

MAX_CONDITION = 1e12
GHOST = -1


@dataclass(frozen=True)
class KalmanConfig:
    sigma_u: float = 0.005
    sigma_v: float = 0.005
    # process noise Q = q^2 * diag(scale), applied per layer step
    process_noise: float = 1e-4
    process_scale: tuple[float, ...] = (0.0, 0.0, 1.0, 1.0, 0.0)
    # explicit diag(sigma_seed^2); None derives C0 from the triplet fit
    seed_sigma: tuple[float, ...] | None = None

    @property
    def V(self) -> np.ndarray:
        return np.diag([self.sigma_u ** 2, self.sigma_v ** 2])

    @property
    def Q(self) -> np.ndarray:
        return self.process_noise ** 2 * np.diag(self.process_scale)


DEFAULT_KALMAN = KalmanConfig()


@dataclass(frozen=True)
class SurfaceMeasurement:
    layer: int
    u: float
    v: float
    V: np.ndarray = field(default_factory=lambda: DEFAULT_KALMAN.V)

    @classmethod
    def from_point(cls, layer, point, V=None) -> "SurfaceMeasurement":
        x, y, z = point
        r = float(np.hypot(x, y))
        return cls(layer, r * float(np.arctan2(y, x)), float(z), DEFAULT_KALMAN.V if V is None else V)

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v])


@dataclass
class KalmanStep:
    predicted_state: np.ndarray
    predicted_cov: np.ndarray
    predicted_meas: np.ndarray
    residual_cov: np.ndarray
    radius: float
    layer: int
    jacobian: np.ndarray
    V: np.ndarray


def measurement_matrix(radius: float) -> np.ndarray:
    H = np.zeros((2, 5))
    H[0, helix.PHI] = radius
    H[1, helix.Z] = 1.0
    return H


def points_to_uv(points, radius):
    points = np.asarray(points, dtype=float)
    return np.stack([radius * np.arctan2(points[..., 1], points[..., 0]), points[..., 2]], axis=-1)


def residual(meas, predicted, radius):
    """``meas - predicted`` with the r*phi component wrapped around the cylinder."""
    d = np.asarray(meas, dtype=float) - np.asarray(predicted, dtype=float)
    du = radius * wrap_angle(d[..., 0] / radius)
    return np.stack([du, d[..., 1]], axis=-1)


def _sym(C):
    return 0.5 * (C + np.swapaxes(C, -1, -2))


def condition_2x2(R):
    """Condition number of symmetric 2x2 matrices via their closed-form eigenvalues."""
    a, b, d = R[..., 0, 0], R[..., 0, 1], R[..., 1, 1]
    half_tr = 0.5 * (a + d)
    disc = np.sqrt(np.maximum(0.25 * (a - d) ** 2 + b * b, 0.0))
    lo, hi = half_tr - disc, half_tr + disc
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(lo > 0, hi / lo, np.inf)


# -- propagators ------------------------------------------------------------------

Propagator = Callable[[np.ndarray, float, float], "tuple[np.ndarray, np.ndarray]"]


def helix_propagator(state, r_from, r_to):
    new, arc = helix.propagate(state, r_from, r_to)
    return new, helix.propagation_jacobian(state, r_from, r_to, arc)


def identity_propagator(state, r_from, r_to):
    state = np.asarray(state, dtype=float)
    return state.copy(), np.broadcast_to(np.eye(5), state.shape[:-1] + (5, 5)).copy()


# -- predict / gate / update -----------------------------------------------------

def predict_arrays(state, cov, r_from, r_to, cfg: KalmanConfig = DEFAULT_KALMAN,
                   propagator: Propagator = helix_propagator):
    """Batched prediction. Returns (p_pred, C_pred, m_pred, R, F, ok)."""
    p_pred, F = propagator(state, r_from, r_to)
    C_pred = _sym(F @ cov @ np.swapaxes(F, -1, -2) + cfg.Q)
    m_pred = np.stack([r_to * p_pred[..., helix.PHI], p_pred[..., helix.Z]], axis=-1)
    H = measurement_matrix(r_to)
    R = _sym(cfg.V + H @ C_pred @ H.T)
    ok = np.all(np.isfinite(p_pred), axis=-1) & np.all(np.isfinite(C_pred), axis=(-1, -2))
    return p_pred, C_pred, m_pred, R, F, ok


def kf_predict(state, cov, from_layer: int, to_layer: int, radii, cfg: KalmanConfig = DEFAULT_KALMAN,
               propagator: Propagator = helix_propagator) -> KalmanStep:
    if to_layer != from_layer + 1:
        raise ValueError("kf_predict only steps to the adjacent outer layer")
    r_from, r_to = radii[from_layer], radii[to_layer]
    p_pred, C_pred, m_pred, R, F, ok = predict_arrays(
        np.asarray(state, dtype=float), np.asarray(cov, dtype=float), r_from, r_to, cfg, propagator)
    if not np.all(ok):
        raise NonFinite(f"propagation from layer {from_layer} to {to_layer} is not finite")
    return KalmanStep(p_pred, C_pred, m_pred, R, r_to, to_layer, F, cfg.V)


def _meas_array(m):
    return m.as_array() if isinstance(m, SurfaceMeasurement) else np.asarray(m, dtype=float)


def _check_residual_cov(R):
    if np.any(condition_2x2(R) > MAX_CONDITION):
        raise SingularResidualCov("residual covariance is numerically singular")


def chi2_arrays(m_pred, R, meas, radius):
    """Predicted chi2 of every measurement against every prediction: (B, n)."""
    Rinv = np.linalg.inv(R)
    r = residual(np.asarray(meas)[None, :, :], m_pred[:, None, :], radius)
    return np.einsum("bni,bij,bnj->bn", r, Rinv, r)


def predicted_chi2(step: KalmanStep, m) -> float:
    if isinstance(m, SurfaceMeasurement) and m.layer != step.layer:
        raise ValueError(f"measurement on layer {m.layer}, step targets layer {step.layer}")
    _check_residual_cov(step.residual_cov)
    r = residual(_meas_array(m), step.predicted_meas, step.radius)
    return float(r @ np.linalg.solve(step.residual_cov, r))


def filter_arrays(p_pred, C_pred, R, m_pred, meas, radius, V):
    """Batched update. Returns (p_filt, C_filt, chi2_filtered)."""
    H = measurement_matrix(radius)
    Rinv = np.linalg.inv(R)
    K = C_pred @ H.T @ Rinv
    r = residual(meas, m_pred, radius)
    p = p_pred + np.einsum("...ij,...j->...i", K, r)
    p[..., helix.PHI] = wrap_angle(p[..., helix.PHI])
    p[..., helix.BETA] = wrap_angle(p[..., helix.BETA])
    IKH = np.eye(5) - K @ H
    # Joseph form: algebraically (I-KH)C for the optimal gain, keeps C symmetric PSD
    C = _sym(IKH @ C_pred @ np.swapaxes(IKH, -1, -2) + K @ V @ np.swapaxes(K, -1, -2))
    # m - H p_filt, formed in residual space as (I - H K) r so that large
    # absolute coordinates do not cancel
    r_f = r - np.einsum("...ij,...j->...i", H @ K, r)
    # V - H C H^T, evaluated as V R^-1 V (equal for the optimal gain) to avoid
    # cancellation when the prediction is far wider than the hit resolution
    R_f = _sym(V @ Rinv @ V)
    chi2 = np.einsum("...i,...i->...", r_f, np.linalg.solve(R_f, r_f[..., None])[..., 0])
    return p, C, chi2


def kf_filter(step: KalmanStep, m):
    _check_residual_cov(step.residual_cov)
    p, C, chi2 = filter_arrays(step.predicted_state, step.predicted_cov, step.residual_cov,
                               step.predicted_meas, _meas_array(m), step.radius, step.V)
    return p, C, float(chi2)


def total_chi2(track_chis) -> float:
    return float(sum(track_chis, 0.0))


def quality_score(l, m_ghost, chi2_total, omega):
    return l - m_ghost - omega * chi2_total


# -- triplet fit -----------------------------------------------------------------

class SeedFit(NamedTuple):
    state: np.ndarray       # local state on the third hit's cylinder
    cov: np.ndarray
    chi2: np.ndarray        # z-line residual chi2 (one degree of freedom)
    helix: np.ndarray       # perigee parameters


def _chord(a, b):
    d = b[..., :2] - a[..., :2]
    return d, np.hypot(d[..., 0], d[..., 1])


def fit_triplets(p0, p1, p2, sigma_v: float = DEFAULT_KALMAN.sigma_v):
    """Circle + straight z(s) line through three points, vectorized.

    Collinear transverse projections give kappa = 0 exactly (straight line).
    Returns ``(state_at_p2, chi2, helix)``.
    """
    p0, p1, p2 = (np.asarray(p, dtype=float) for p in (p0, p1, p2))
    a, la = _chord(p0, p1)
    b, lb = _chord(p1, p2)
    _, lc = _chord(p0, p2)
    cross = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    with np.errstate(invalid="ignore", divide="ignore"):
        kappa = np.where(la * lb * lc > 0, 2 * cross / (la * lb * lc), 0.0)
    xa = np.clip(kappa * la / 2, -1, 1)
    xb = np.clip(kappa * lb / 2, -1, 1)
    s01 = la * helix._asinx(xa)
    s12 = lb * helix._asinx(xb)
    beta0 = np.arctan2(a[..., 1], a[..., 0]) - np.arcsin(xa)
    s = np.stack([np.zeros_like(s01), s01, s01 + s12], axis=-1)
    z = np.stack([p0[..., 2], p1[..., 2], p2[..., 2]], axis=-1)
    s_mean = s.mean(axis=-1, keepdims=True)
    z_mean = z.mean(axis=-1, keepdims=True)
    var = ((s - s_mean) ** 2).sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cot = np.where(var > 0, ((s - s_mean) * (z - z_mean)).sum(axis=-1) / var, 0.0)
    z_fit = z_mean + cot[..., None] * (s - s_mean)
    chi2 = ((z - z_fit) ** 2).sum(axis=-1) / sigma_v ** 2
    beta2 = wrap_angle(beta0 + kappa * (s01 + s12))
    state = np.stack([np.arctan2(p2[..., 1], p2[..., 0]), z_fit[..., 2], beta2, cot, kappa], axis=-1)
    r2 = np.hypot(p2[..., 0], p2[..., 1])
    return state, chi2, helix.state_to_helix(state, r2)


def _rotate(p, dphi):
    c, s = np.cos(dphi), np.sin(dphi)
    out = p.copy()
    out[..., 0] = c * p[..., 0] - s * p[..., 1]
    out[..., 1] = s * p[..., 0] + c * p[..., 1]
    return out


def triplet_covariance(p0, p1, p2, cfg: KalmanConfig = DEFAULT_KALMAN):
    """Seed covariance: measurement noise pushed through the triplet fit (J V J^T).

    The Jacobian is taken by central differences in the six surface coordinates.
    """
    pts = [np.asarray(p, dtype=float) for p in (p0, p1, p2)]
    batch = pts[0].shape[:-1]
    if cfg.seed_sigma is not None:
        return np.broadcast_to(np.diag(np.square(cfg.seed_sigma)), batch + (5, 5)).copy()
    cols = []
    sig = []
    for i in range(3):
        r = np.hypot(pts[i][..., 0], pts[i][..., 1])
        for coord, sigma in ((0, cfg.sigma_u), (1, cfg.sigma_v)):
            step = 1e-3 * sigma
            plus = [p.copy() for p in pts]
            minus = [p.copy() for p in pts]
            if coord == 0:
                plus[i] = _rotate(pts[i], step / r)
                minus[i] = _rotate(pts[i], -step / r)
            else:
                plus[i][..., 2] += step
                minus[i][..., 2] -= step
            sp = fit_triplets(*plus, cfg.sigma_v)[0]
            sm = fit_triplets(*minus, cfg.sigma_v)[0]
            d = sp - sm
            d[..., helix.PHI] = wrap_angle(d[..., helix.PHI])
            d[..., helix.BETA] = wrap_angle(d[..., helix.BETA])
            cols.append(d / (2 * step))
            sig.append(sigma ** 2)
    J = np.stack(cols, axis=-1)
    return _sym(np.einsum("...ik,k,...jk->...ij", J, np.array(sig), J))


def seed_fit(h0, h1, h2, cfg: KalmanConfig = DEFAULT_KALMAN) -> SeedFit:
    state, chi2, hp = fit_triplets(h0, h1, h2, cfg.sigma_v)
    cov = triplet_covariance(h0, h1, h2, cfg)
    return SeedFit(state, cov, chi2, hp)


# -- forward filter history and RTS smoother ---------------------------------------

@dataclass
class FilterHistory:
    layers: list[int]
    radii: list[float]
    filt_state: list[np.ndarray]
    filt_cov: list[np.ndarray]
    pred_state: list[np.ndarray | None]
    pred_cov: list[np.ndarray | None]
    jac: list[np.ndarray | None]
    meas: list[np.ndarray | None]
    chi2: list[float]
    seed_chi2: float
    V: np.ndarray


def run_filter(seed: SeedFit, hits_uv, radii, cfg: KalmanConfig = DEFAULT_KALMAN,
               propagator: Propagator = helix_propagator) -> FilterHistory:
    """Forward filter from the seed (layer 2) through ``hits_uv`` for layers 3..L-1.

    ``hits_uv`` holds one ``(u, v)`` pair per layer beyond the seed, or None for a ghost.
    """
    state, cov = np.asarray(seed.state, dtype=float), np.asarray(seed.cov, dtype=float)
    hist = FilterHistory([2], [radii[2]], [state], [cov], [None], [None], [None], [None], [0.0],
                         float(seed.chi2), cfg.V)
    for offset, m in enumerate(hits_uv):
        layer = 3 + offset
        step = kf_predict(state, cov, layer - 1, layer, radii, cfg, propagator)
        if m is None:
            state, cov, c2 = step.predicted_state, step.predicted_cov, 0.0
        else:
            _check_residual_cov(step.residual_cov)
            state, cov, c2 = kf_filter(step, m)
        hist.layers.append(layer)
        hist.radii.append(radii[layer])
        hist.filt_state.append(state)
        hist.filt_cov.append(cov)
        hist.pred_state.append(step.predicted_state)
        hist.pred_cov.append(step.predicted_cov)
        hist.jac.append(step.jacobian)
        hist.meas.append(None if m is None else np.asarray(m, dtype=float))
        hist.chi2.append(c2)
    return hist


def _state_diff(a, b):
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    d[..., helix.PHI] = wrap_angle(d[..., helix.PHI])
    d[..., helix.BETA] = wrap_angle(d[..., helix.BETA])
    return d


def rts_smooth(hist: FilterHistory):
    """Rauch-Tung-Striebel backward pass. Returns (states, covs, smoothed chi2 per layer)."""
    n = len(hist.layers)
    states = [None] * n
    covs = [None] * n
    states[-1], covs[-1] = hist.filt_state[-1], hist.filt_cov[-1]
    for k in range(n - 2, -1, -1):
        C_pred_next = hist.pred_cov[k + 1]
        A = hist.filt_cov[k] @ hist.jac[k + 1].T @ np.linalg.inv(C_pred_next)
        states[k] = hist.filt_state[k] + A @ _state_diff(states[k + 1], hist.pred_state[k + 1])
        covs[k] = _sym(hist.filt_cov[k] + A @ (covs[k + 1] - C_pred_next) @ A.T)
    V = hist.V
    chis = [0.0] * n
    for k in range(1, n):
        m = hist.meas[k]
        if m is None:
            continue
        radius = hist.radii[k]
        H = measurement_matrix(radius)
        r = residual(m, H @ states[k], radius)
        Rs = _sym(V - H @ covs[k] @ H.T)
        _check_residual_cov(Rs)
        chis[k] = float(r @ np.linalg.solve(Rs, r))
    return states, covs, chis


@dataclass
class SmoothResult:
    states: list[np.ndarray]
    covs: list[np.ndarray]
    chi2_total: float
    quality: float
    filtered: FilterHistory


def smooth_track(candidate, event, cfg: KalmanConfig = DEFAULT_KALMAN, omega: float = 1.0,
                 propagator: Propagator = helix_propagator) -> SmoothResult:
    """Refit a candidate: forward filter replay followed by an RTS backward pass.

    The refit quality is ``l - m_ghost - omega * chi2`` with the smoothed chi2 of
    the hits beyond the seed plus the seed's own line-fit chi2.
    """
    hits = list(candidate.hits)
    if sum(1 for _, j in hits if j != GHOST) < 3 or any(j == GHOST for _, j in hits[:3]):
        raise ValueError("smoothing needs a seed of three real hits")
    radii = event.geometry.layer_radii
    pts = [event.point(l, j) for l, j in hits[:3]]
    seed = seed_fit(*pts, cfg=cfg)
    uv = [None if j == GHOST else points_to_uv(event.point(l, j), radii[l]) for l, j in hits[3:]]
    hist = run_filter(seed, uv, radii, cfg, propagator)
    states, covs, chis = rts_smooth(hist)
    chi2_total = float(seed.chi2) + sum(chis)
    m_ghost = sum(1 for _, j in hits if j == GHOST)
    last = hits[-1][0]
    q = quality_score(last, m_ghost, chi2_total, omega)
    return SmoothResult(states, covs, chi2_total, q, hist)


def smooth_batch(seed_state, seed_cov, seed_chi2, uv, ghost, radii, cfg: KalmanConfig = DEFAULT_KALMAN,
                 propagator: Propagator = helix_propagator):
    """Vectorized forward filter + RTS smoother for many tracks of equal length.

    ``uv`` is ``(B, K, 2)`` for layers ``3..3+K-1`` and ``ghost`` a ``(B, K)``
    mask.  Returns ``(chi2_total, ok)``; rows that go non-finite or hit a
    singular residual covariance come back with ``ok = False``.
    """
    p = np.array(seed_state, dtype=float)
    C = np.array(seed_cov, dtype=float)
    uv = np.asarray(uv, dtype=float)
    ghost = np.asarray(ghost, dtype=bool)
    B, K = ghost.shape
    ok = np.ones(B, dtype=bool)
    filt_p, filt_C, pred_p, pred_C, jacs = [p], [C], [None], [None], [None]
    V = cfg.V
    for k in range(K):
        layer = 3 + k
        p_pred, C_pred, m_pred, R, F, good = predict_arrays(p, C, radii[layer - 1], radii[layer], cfg, propagator)
        real = ~ghost[:, k]
        good &= ~(real & (condition_2x2(R) > MAX_CONDITION))
        ok &= good
        R = np.where(ok[:, None, None], R, np.eye(2))
        p_pred = np.where(ok[:, None], p_pred, 0.0)
        m_pred = np.where(ok[:, None], m_pred, 0.0)
        C_pred = np.where(ok[:, None, None], C_pred, np.eye(5))
        pf, Cf, _ = filter_arrays(p_pred, C_pred, R, m_pred, uv[:, k], radii[layer], V)
        p = np.where((real & ok)[:, None], pf, p_pred)
        C = np.where((real & ok)[:, None, None], Cf, C_pred)
        filt_p.append(p)
        filt_C.append(C)
        pred_p.append(p_pred)
        pred_C.append(C_pred)
        jacs.append(np.where(ok[:, None, None], F, np.eye(5)))
    sp, sC = filt_p[-1], filt_C[-1]
    chi2 = np.array(seed_chi2, dtype=float).copy()
    for k in range(K, -1, -1):
        if k < K:
            A = filt_C[k] @ np.swapaxes(jacs[k + 1], -1, -2) @ np.linalg.inv(pred_C[k + 1])
            sp = filt_p[k] + np.einsum("bij,bj->bi", A, _state_diff(sp, pred_p[k + 1]))
            sC = _sym(filt_C[k] + A @ (sC - pred_C[k + 1]) @ np.swapaxes(A, -1, -2))
        if k == 0:
            break
        radius = radii[2 + k]
        H = measurement_matrix(radius)
        r = residual(uv[:, k - 1], np.stack([radius * sp[:, helix.PHI], sp[:, helix.Z]], axis=-1), radius)
        Rs = _sym(V - H @ sC @ H.T)
        real = ~ghost[:, k - 1]
        bad = real & ~(condition_2x2(Rs) <= MAX_CONDITION)
        ok &= ~bad
        Rs = np.where((real & ok)[:, None, None], Rs, np.eye(2))
        c = np.einsum("bi,bi->b", r, np.linalg.solve(Rs, r[..., None])[..., 0])
        chi2 += np.where(real & ok, c, 0.0)
    ok &= np.isfinite(chi2)
    return chi2, ok
