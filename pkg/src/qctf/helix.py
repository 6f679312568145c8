"""Helix geometry in a uniform solenoidal field and cylinder-to-cylinder propagation.

Two parameterizations are used throughout the package:

* global perigee parameters ``(d0, z0, phi0, cot_theta, kappa)`` held by
  :class:`HelixParams`, used by the event generator and the seeding cuts;
* a local layer state ``(phi, z, beta, cot_theta, kappa)`` at a cylinder of
  known radius, where ``(R*phi, z)`` is the position on the surface and
  ``beta`` the transverse direction of flight.  The Kalman filter runs on
  this representation, which makes the measurement map linear.

All array functions broadcast over leading dimensions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_SMALL = 1e-3

# column order of the local state vector
PHI, Z, BETA, COT, KAPPA = range(5)


@dataclass(frozen=True)
class HelixParams:
    d0: float
    z0: float
    phi0: float
    cot_theta: float
    kappa: float

    def __post_init__(self):
        vals = self.as_array()
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"non-finite helix parameters: {vals}")
        if abs(self.phi0) > math.pi + 1e-12:
            raise ValueError(f"phi0 out of range: {self.phi0}")

    def as_array(self) -> np.ndarray:
        return np.array([self.d0, self.z0, self.phi0, self.cot_theta, self.kappa])

    @classmethod
    def from_array(cls, a) -> "HelixParams":
        a = np.asarray(a, dtype=float)
        return cls(float(a[0]), float(a[1]), float(wrap_angle(a[2])), float(a[3]), float(a[4]))


def wrap_angle(a):
    """Map angles to (-pi, pi]."""
    a = np.asarray(a, dtype=float)
    w = np.mod(a + np.pi, 2 * np.pi) - np.pi
    return np.where(w == -np.pi, np.pi, w)


# -- stable trigonometric kernels -------------------------------------------

def _sinc(b):
    """sin(b)/b"""
    b = np.asarray(b, dtype=float)
    small = np.abs(b) < _SMALL
    bs = np.where(small, 1.0, b)
    b2 = b * b
    return np.where(small, 1 - b2 / 6 + b2 * b2 / 120, np.sin(bs) / bs)


def _cosc(b):
    """(1 - cos b)/b"""
    b = np.asarray(b, dtype=float)
    small = np.abs(b) < _SMALL
    bs = np.where(small, 1.0, b)
    b2 = b * b
    return np.where(small, b / 2 - b * b2 / 24 + b * b2 * b2 / 720, (1 - np.cos(bs)) / bs)


def _dsinc(b):
    b = np.asarray(b, dtype=float)
    small = np.abs(b) < _SMALL
    bs = np.where(small, 1.0, b)
    b2 = b * b
    return np.where(small, -b / 3 + b * b2 / 30, (bs * np.cos(bs) - np.sin(bs)) / (bs * bs))


def _dcosc(b):
    b = np.asarray(b, dtype=float)
    small = np.abs(b) < _SMALL
    bs = np.where(small, 1.0, b)
    b2 = b * b
    return np.where(small, 0.5 - b2 / 8 + b2 * b2 / 144,
                    (bs * np.sin(bs) - (1 - np.cos(bs))) / (bs * bs))


def _asinx(x):
    """asin(x)/x, continuous at 0."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < _SMALL
    xs = np.where(small, 1.0, x)
    x2 = x * x
    return np.where(small, 1 + x2 / 6 + 3 * x2 * x2 / 40, np.arcsin(np.clip(xs, -1, 1)) / xs)


# -- perigee helix ------------------------------------------------------------

def helix_point(h: HelixParams, s):
    """Point on the helix at transverse arc length ``s`` from the perigee."""
    return helix_points(h.as_array(), s)


def helix_points(params, s):
    params = np.asarray(params, dtype=float)
    d0, z0, phi0, cot, kappa = np.moveaxis(params, -1, 0)
    s = np.asarray(s, dtype=float)
    b = kappa * s
    cs, sn = np.cos(phi0), np.sin(phi0)
    x = -d0 * sn + s * (cs * _sinc(b) - sn * _cosc(b))
    y = d0 * cs + s * (sn * _sinc(b) + cs * _cosc(b))
    z = z0 + cot * s + 0 * b
    return np.stack(np.broadcast_arrays(x, y, z), axis=-1)


def helix_direction(params, s):
    """Transverse direction angle at arc length ``s``."""
    params = np.asarray(params, dtype=float)
    return params[..., 2] + params[..., 4] * np.asarray(s, dtype=float)


def perigee_arclength(d0, kappa, radius):
    """Smallest non-negative arc length at which the perigee helix reaches ``radius``.

    Returns NaN where the circle never reaches the cylinder.
    """
    d0 = np.asarray(d0, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    radius = np.asarray(radius, dtype=float)
    denom = 4 * (1 + kappa * d0)
    num = radius * radius - d0 * d0
    with np.errstate(invalid="ignore", divide="ignore"):
        h2 = np.where((denom > 0) & (num >= 0), num / denom, np.nan)
        h = np.sqrt(h2)
        x = np.abs(kappa) * h
        return np.where(x <= 1.0, 2 * h * _asinx(np.where(x <= 1.0, x, 0.0)), np.nan)


def intersect_layer(h: HelixParams, radius: float):
    """First intersection of the helix with a cylinder, or ``None`` when missed."""
    s = perigee_arclength(h.d0, h.kappa, radius)
    if not np.isfinite(s):
        return None
    return helix_point(h, float(s))


def intersect_many(params, radius):
    """Vectorized :func:`intersect_layer`; returns ``(points, arc)`` with NaN rows for misses."""
    params = np.asarray(params, dtype=float)
    s = perigee_arclength(params[..., 0], params[..., 4], radius)
    pts = helix_points(params, np.where(np.isfinite(s), s, 0.0))
    pts = np.where(np.isfinite(s)[..., None], pts, np.nan)
    return pts, s


# -- local layer state --------------------------------------------------------

def helix_to_state(params, radius):
    """Local state at the first crossing of ``radius``; NaN rows when missed."""
    params = np.asarray(params, dtype=float)
    pts, s = intersect_many(params, radius)
    beta = helix_direction(params, s)
    phi = np.arctan2(pts[..., 1], pts[..., 0])
    return np.stack([phi, pts[..., 2], wrap_angle(beta), params[..., 3], params[..., 4]], axis=-1)


def state_to_helix(state, radius):
    """Perigee parameters of the helix through a local state on ``radius``."""
    state = np.asarray(state, dtype=float)
    phi, z, beta, cot, kappa = np.moveaxis(state, -1, 0)
    radius = np.asarray(radius, dtype=float)
    x, y = radius * np.cos(phi), radius * np.sin(phi)
    tx, ty = np.cos(beta), np.sin(beta)
    d_lin = y * tx - x * ty
    q = kappa * radius * radius + 2 * d_lin
    with np.errstate(invalid="ignore"):
        d0 = q / (1 + np.sqrt(1 + kappa * q))
    outward = np.where(x * tx + y * ty >= 0, 1.0, -1.0)
    s1 = outward * perigee_arclength(d0, kappa, radius)
    phi0 = wrap_angle(beta - kappa * s1)
    z0 = z - cot * s1
    return np.stack([d0, z0, phi0, cot, kappa], axis=-1)


def _displacement(beta, kappa, s):
    b = kappa * s
    cs, sn = np.cos(beta), np.sin(beta)
    sc, cc = _sinc(b), _cosc(b)
    return s * (cs * sc - sn * cc), s * (sn * sc + cs * cc)


def propagation_arclength(state, r_from, r_to):
    """Transverse arc length from a state on ``r_from`` to the next crossing of ``r_to``."""
    state = np.asarray(state, dtype=float)
    helix = state_to_helix(state, r_from)
    d0, kappa = helix[..., 0], helix[..., 4]
    phi, beta = state[..., PHI], state[..., BETA]
    outward = np.where(np.cos(beta - phi) >= 0, 1.0, -1.0)
    return perigee_arclength(d0, kappa, r_to) - outward * perigee_arclength(d0, kappa, r_from)


def propagate(state, r_from, r_to):
    """Exact helix transport of a local state between two cylinders.

    Returns ``(new_state, arc)``; rows that miss ``r_to`` come back as NaN.
    """
    state = np.asarray(state, dtype=float)
    s = propagation_arclength(state, r_from, r_to)
    phi, z, beta, cot, kappa = np.moveaxis(state, -1, 0)
    dx, dy = _displacement(beta, kappa, s)
    x2 = r_from * np.cos(phi) + dx
    y2 = r_from * np.sin(phi) + dy
    out = np.stack([np.arctan2(y2, x2), z + cot * s, wrap_angle(beta + kappa * s),
                    cot + 0 * s, kappa + 0 * s], axis=-1)
    return out, s


def propagation_jacobian(state, r_from, r_to, arc=None):
    """Analytic Jacobian of :func:`propagate` with respect to the input state.

    The arc length is fixed implicitly by ``|p(s)| = r_to``; its derivatives
    follow from the implicit function theorem, ``ds/dx = -(p.dp/dx)/(p.T)``.
    """
    state = np.asarray(state, dtype=float)
    s = propagation_arclength(state, r_from, r_to) if arc is None else np.asarray(arc, dtype=float)
    phi, z, beta, cot, kappa = np.moveaxis(state, -1, 0)
    b = kappa * s
    cs, sn = np.cos(beta), np.sin(beta)
    sc, cc = _sinc(b), _cosc(b)
    dx = s * (cs * sc - sn * cc)
    dy = s * (sn * sc + cs * cc)
    x1, y1 = r_from * np.cos(phi), r_from * np.sin(phi)
    x2, y2 = x1 + dx, y1 + dy
    beta2 = beta + b
    tx, ty = np.cos(beta2), np.sin(beta2)

    # partials of the end point at fixed arc length
    dsc, dcc = _dsinc(b), _dcosc(b)
    partial = {
        PHI: (-y1, x1),
        BETA: (-dy, dx),
        KAPPA: (s * s * (cs * dsc - sn * dcc), s * s * (sn * dsc + cs * dcc)),
    }
    p_dot_t = x2 * tx + y2 * ty
    r2sq = x2 * x2 + y2 * y2

    shape = state.shape[:-1] + (5, 5)
    jac = np.zeros(shape)
    jac[..., Z, Z] = 1.0
    jac[..., Z, COT] = s
    jac[..., COT, COT] = 1.0
    jac[..., KAPPA, KAPPA] = 1.0
    jac[..., BETA, BETA] = 1.0
    jac[..., BETA, KAPPA] = s
    for col, (px, py) in partial.items():
        ds = -(x2 * px + y2 * py) / p_dot_t
        tot_x = px + tx * ds
        tot_y = py + ty * ds
        jac[..., PHI, col] = (x2 * tot_y - y2 * tot_x) / r2sq
        jac[..., Z, col] += cot * ds
        jac[..., BETA, col] += kappa * ds
    return jac


def state_to_point(state, radius):
    state = np.asarray(state, dtype=float)
    phi = state[..., PHI]
    return np.stack([radius * np.cos(phi), radius * np.sin(phi), state[..., Z]], axis=-1)
