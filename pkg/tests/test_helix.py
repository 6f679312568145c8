import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from qctf import helix
from qctf.helix import HelixParams

params = st.tuples(
    st.floats(-0.3, 0.3), st.floats(-5, 5), st.floats(-3.1, 3.1), st.floats(-1, 1), st.floats(-0.02, 0.02),
)


def ode_point(h: HelixParams, s_end):
    """Integrate dx/ds = cos b, dy/ds = sin b, db/ds = kappa, dz/ds = cot from the perigee."""
    y0 = [-h.d0 * math.sin(h.phi0), h.d0 * math.cos(h.phi0), h.z0, h.phi0]

    def rhs(_, y):
        return [math.cos(y[3]), math.sin(y[3]), h.cot_theta, h.kappa]

    sol = solve_ivp(rhs, (0, s_end), y0, rtol=1e-11, atol=1e-12)
    return sol.y[:3, -1]


def first_crossing(h: HelixParams, radius):
    """Bracket the first root of |p(s)| - R on a fine grid, then refine."""
    f = lambda s: np.hypot(*helix.helix_point(h, s)[:2]) - radius
    grid = np.linspace(0, 4 * radius + 10, 4000)
    pts = helix.helix_points(h.as_array(), grid)
    vals = np.hypot(pts[:, 0], pts[:, 1]) - radius
    change = np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))
    if not len(change):
        return None
    k = change[0]
    return brentq(f, grid[k], grid[k + 1], xtol=1e-13)


@settings(max_examples=40, deadline=None)
@given(params, st.floats(0.0, 40.0))
def test_points_match_ode(p, s):
    h = HelixParams(*p)
    np.testing.assert_allclose(helix.helix_point(h, s), ode_point(h, s), atol=1e-7)


@settings(max_examples=40, deadline=None)
@given(params, st.sampled_from([3.0, 10.0, 24.0]))
def test_layer_intersection_matches_root_finding(p, radius):
    h = HelixParams(*p)
    s = helix.perigee_arclength(h.d0, h.kappa, radius)
    s_ref = first_crossing(h, radius)
    if s_ref is None:
        assert not np.isfinite(s)
        return
    assert s == pytest.approx(s_ref, abs=1e-7)
    np.testing.assert_allclose(np.hypot(*helix.intersect_layer(h, radius)[:2]), radius, atol=1e-9)


def test_curling_track_misses_outer_layer():
    h = HelixParams(0.0, 0.0, 0.3, 0.0, 0.2)      # diameter 10
    assert helix.intersect_layer(h, 6.0) is not None
    assert helix.intersect_layer(h, 16.0) is None


def test_straight_line_limit():
    h = HelixParams(0.1, 1.0, 0.7, 0.5, 0.0)
    p = helix.intersect_layer(h, 10.0)
    s = math.sqrt(100 - 0.01)
    np.testing.assert_allclose(p, [-0.1 * math.sin(0.7) + s * math.cos(0.7),
                                   0.1 * math.cos(0.7) + s * math.sin(0.7), 1.0 + 0.5 * s], atol=1e-12)


def test_rejects_non_finite():
    with pytest.raises(ValueError):
        HelixParams(0, 0, 0, float("nan"), 0)


def test_wrap_angle_range():
    a = np.linspace(-20, 20, 1001)
    w = helix.wrap_angle(a)
    assert np.all(w > -math.pi) and np.all(w <= math.pi)
    np.testing.assert_allclose(np.cos(w), np.cos(a), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(params)
def test_state_helix_round_trip(p):
    h = np.array(p)
    st_ = helix.helix_to_state(h, 10.0)
    if not np.all(np.isfinite(st_)):
        return
    back = helix.state_to_helix(st_, 10.0)
    diff = back - h
    diff[2] = helix.wrap_angle(diff[2])
    np.testing.assert_allclose(diff, 0, atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(params, st.sampled_from([(3.0, 6.0), (6.0, 10.0), (16.0, 24.0)]))
def test_propagate_matches_direct_intersection(p, radii):
    r0, r1 = radii
    h = np.array(p)
    s0, s1 = helix.helix_to_state(h, r0), helix.helix_to_state(h, r1)
    if not (np.all(np.isfinite(s0)) and np.all(np.isfinite(s1))):
        return
    moved, _ = helix.propagate(s0, r0, r1)
    d = moved - s1
    d[[0, 2]] = helix.wrap_angle(d[[0, 2]])
    np.testing.assert_allclose(d, 0, atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(params, st.sampled_from([(3.0, 6.0), (10.0, 16.0), (24.0, 34.0)]))
def test_jacobian_matches_finite_differences(p, radii):
    r0, r1 = radii
    s0 = helix.helix_to_state(np.array(p), r0)
    if not np.all(np.isfinite(s0)) or not np.all(np.isfinite(helix.propagate(s0, r0, r1)[0])):
        return
    J = helix.propagation_jacobian(s0, r0, r1)
    eps = 1e-6
    fd = np.zeros((5, 5))
    for k in range(5):
        d = np.zeros(5)
        d[k] = eps
        hi, _ = helix.propagate(s0 + d, r0, r1)
        lo, _ = helix.propagate(s0 - d, r0, r1)
        diff = hi - lo
        diff[[0, 2]] = helix.wrap_angle(diff[[0, 2]])
        fd[:, k] = diff / (2 * eps)
    if not np.all(np.isfinite(fd)):
        return
    np.testing.assert_allclose(J, fd, atol=2e-5 * (1 + np.abs(fd).max()))
