import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lipnav.lip import LipState, StanceFoot, StepControl
from lipnav.safety import (
    ABS_SMOOTHING,
    REACH_FLOOR,
    CbfConfig,
    Circle,
    Ellipse,
    KinematicLimits,
    barrier_value,
    constraint_bundle,
    dcbf_residual,
    ellipse_coefficients,
    inflate,
    maneuverability_jacobian,
    maneuverability_residuals,
    reachability_jacobian,
    reachability_residuals,
    turn_rate_residuals,
    velocity_jacobian,
    velocity_residuals,
)
from oracles import central_jacobian, parametric_inside, relative_error

LIM = KinematicLimits()
CBF = CbfConfig()


def random_obstacles(rng, n):
    out = []
    for i in range(n):
        c = rng.uniform(-3, 3, 2)
        if i % 2:
            out.append(Circle(c[0], c[1], rng.uniform(0.3, 1.2)))
        else:
            a, b = sorted(rng.uniform(0.3, 1.4, 2), reverse=True)
            out.append(Ellipse(c[0], c[1], a, b, rng.uniform(0, math.pi)))
    return out


# --- barriers -------------------------------------------------------------


def test_circle_barrier_examples():
    c = Circle(0, 0, 1)
    assert barrier_value(c, (1, 0)) == 0.0
    assert barrier_value(c, (2, 0)) == 3.0


def test_ellipse_boundary_points():
    e = Ellipse(0, 0, 2, 1, 0.0)
    for p in [(2, 0), (-2, 0), (0, 1), (0, -1)]:
        assert barrier_value(e, p) == pytest.approx(0.0, abs=1e-12)
    r = Ellipse(0, 0, 2, 1, math.pi / 2)
    for p in [(0, 2), (0, -2), (1, 0), (-1, 0)]:
        assert barrier_value(r, p) == pytest.approx(0.0, abs=1e-12)


def test_ellipse_coefficients_axis_aligned():
    # conic for a=2, b=1: x^2 + 4 y^2 = 4, with D = a b = 2
    A, B, C, D = ellipse_coefficients(2, 1, 0.0)
    assert (A, B, C, D) == pytest.approx((1.0, 0.0, 4.0, 2.0), abs=1e-15)


@pytest.mark.parametrize("rot", [0.0, 0.3, 1.2, 2.9])
def test_unit_ellipse_is_circle(rot):
    A, B, C, D = ellipse_coefficients(1, 1, rot)
    assert A == pytest.approx(C) and B == pytest.approx(0.0, abs=1e-15)
    assert barrier_value(Ellipse(0, 0, 1, 1, rot), (math.cos(rot + 1), math.sin(rot + 1))) == pytest.approx(0, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 5), st.floats(0.05, 5), st.floats(-10, 10))
def test_conic_is_positive_definite(a1, a2, rot):
    A, B, C, D = ellipse_coefficients(max(a1, a2), min(a1, a2), rot)
    assert A > 0 and C > 0 and D > 0 and 4 * A * C - B * B > 0


@pytest.mark.parametrize("a,b", [(1.0, 2.0), (0.0, 0.0), (1.0, -1.0), (float("inf"), 1.0)])
def test_degenerate_axes_rejected(a, b):
    with pytest.raises(ValueError):
        ellipse_coefficients(a, b, 0.0)


def test_circle_radius_validated():
    with pytest.raises(ValueError):
        Circle(0, 0, 0.0)


def test_inflate():
    assert inflate(Circle(1, 2, 0.6), 0.4) == Circle(1, 2, 1.0)
    e = Ellipse(0, 0, 1.0, 0.5, 0.7)
    assert inflate(e, 0.0) == e
    g = inflate(e, 0.4)
    assert (g.semi_major, g.semi_minor, g.rotation) == pytest.approx((1.4, 0.9, 0.7))
    with pytest.raises(ValueError):
        inflate(e, -0.1)


def test_boundary_point_is_inside_after_inflation():
    rng = np.random.default_rng(3)
    for ob in random_obstacles(rng, 10):
        if isinstance(ob, Circle):
            p = (ob.center_x + ob.radius, ob.center_y)
        else:
            p = (ob.center_x + ob.semi_major * math.cos(ob.rotation), ob.center_y + ob.semi_major * math.sin(ob.rotation))
        assert barrier_value(ob, p) == pytest.approx(0.0, abs=1e-9)
        assert barrier_value(inflate(ob, 0.4), p) < 0.0


def test_barrier_sign_matches_parametric_shape():
    rng = np.random.default_rng(4)
    for ob in random_obstacles(rng, 12):
        pts = rng.uniform(-4.5, 4.5, (1000, 2))
        for px, py in pts:
            h = barrier_value(ob, (px, py))
            if isinstance(ob, Circle):
                inside = parametric_inside(ob.center_x, ob.center_y, ob.radius, ob.radius, 0.0, px, py)
            else:
                inside = parametric_inside(ob.center_x, ob.center_y, ob.semi_major, ob.semi_minor, ob.rotation, px, py)
            if abs(h) > 1e-9:
                assert (h < 0) == inside


# --- DCBF -----------------------------------------------------------------


def test_dcbf_examples():
    assert dcbf_residual(3.0, 2.0, 0.3) == pytest.approx(1.6)
    assert dcbf_residual(3.0, 2.0, 1.0) == 3.0
    assert dcbf_residual(0.7, 0.0, 0.3) == 0.7


@pytest.mark.parametrize("h0", [1e-3, 0.5, 7.0, 1e4])
def test_dcbf_decay_law(h0):
    g = 0.3
    h = [h0]
    for _ in range(50):
        h.append((1 - g) * h[-1])
    for k in range(50):
        assert dcbf_residual(h[k + 1], h[k], g) == pytest.approx(0.0, abs=1e-12 * h0)
        assert h[k + 1] > 0
        assert abs(h[k] - (1 - g) ** k * h0) <= 1e-12 * max(1.0, h0)


def test_cbf_config_validated():
    for kw in ({"gamma": 0.0}, {"gamma": 1.5}, {"inflation_margin": -1.0}):
        with pytest.raises(ValueError):
            CbfConfig(**kw)


def test_kinematic_limits_validated():
    for kw in ({"v_x_min": 1.0}, {"v_y_min": 0.0}, {"L_max": 0.0}, {"alpha": -1.0}):
        with pytest.raises(ValueError):
            KinematicLimits(**kw)


# --- kinematic rows -------------------------------------------------------


def test_velocity_box_examples():
    r0 = velocity_residuals(LipState(0, 0.6, 0, 0.2, 0.0), StanceFoot.RIGHT, LIM)
    assert np.all(r0 >= 0)
    r1 = velocity_residuals(LipState(0, -0.2, 0, 0.6, math.pi / 2), StanceFoot.RIGHT, LIM)
    assert np.allclose(r0, r1, atol=1e-12)
    r2 = velocity_residuals(LipState(0, 0.6, 0, 0.2, 0.0), StanceFoot.LEFT, LIM)
    assert r2[3] == pytest.approx(-0.35)


@settings(max_examples=200, deadline=None)
@given(st.floats(-1, 1), st.floats(0.01, 1), st.floats(-math.pi, math.pi), st.booleans())
def test_leg_crossing_excluded(lon, lat_mag, th, right):
    stance = StanceFoot.RIGHT if right else StanceFoot.LEFT
    # lateral sign opposite to what the stance allows
    lat = -lat_mag if right else lat_mag
    c, s = math.cos(th), math.sin(th)
    x = LipState(0, c * lon - s * lat, 0, s * lon + c * lat, th)
    assert velocity_residuals(x, stance, LIM).min() < 0


def test_reach_examples():
    assert reachability_residuals(LipState(0, 0, 0, 0), StepControl(0.3, 0), LIM)[0] == pytest.approx(0.0, abs=1e-15)
    assert reachability_residuals(LipState(0, 0, 0, 0), StepControl(0, 0), LIM)[1] == -REACH_FLOOR
    r = reachability_residuals(LipState(0, 0, 0, 0), StepControl(0.1, 0.1), LIM)
    assert r == pytest.approx([0.09 - 0.02, 0.02 - REACH_FLOOR])


def test_turn_rate_examples():
    w = math.pi / 16
    assert turn_rate_residuals(StepControl(0, 0, w), LIM)[0] == 0.0
    assert turn_rate_residuals(StepControl(0, 0, 0), LIM) == pytest.approx([w, w])
    assert turn_rate_residuals(StepControl(0, 0, -math.pi / 8), LIM)[1] == pytest.approx(-w)


def test_maneuverability_examples():
    x = LipState(0, 0.6, 0, 0.0, 0.0)
    r = maneuverability_residuals(x, StepControl(0, 0, 0.0), LIM)
    assert r == pytest.approx([0.2, 0.2], abs=1e-12)
    # (alpha / pi) * Omega_max = 3.6 / 16 = 0.225
    at_limit = LipState(0, 0.575, 0, 0, 0)
    assert maneuverability_residuals(at_limit, StepControl(0, 0, math.pi / 16), LIM)[0] == pytest.approx(0.0, abs=2e-6)
    assert maneuverability_residuals(LipState(0, 0.6, 0, 0, 0), StepControl(0, 0, math.pi / 16), LIM)[0] < 0
    for w in (0.01, 0.1, 0.19):
        assert np.array_equal(
            maneuverability_residuals(x, StepControl(0, 0, w), LIM),
            maneuverability_residuals(x, StepControl(0, 0, -w), LIM),
        )


def test_maneuverability_smoothing_bias():
    x = LipState(0, 0.6, 0, 0.0, 0.0)
    for w in (0.0, 1e-3, 0.1):
        exact = 0.8 - (LIM.alpha / math.pi * abs(w) + 0.6)
        assert abs(maneuverability_residuals(x, StepControl(0, 0, w), LIM)[0] - exact) <= LIM.alpha / math.pi * ABS_SMOOTHING + 1e-15


# --- gradients ------------------------------------------------------------


def _check(analytic, numeric, tol=1e-5):
    # the 1e-3 floor makes near-zero entries an absolute comparison
    assert relative_error(analytic, numeric).max() <= tol


def test_row_gradients_match_finite_differences():
    rng = np.random.default_rng(5)
    for i in range(100):
        x = np.r_[rng.uniform(-2, 2), rng.uniform(-1, 1), rng.uniform(-2, 2), rng.uniform(-1, 1), rng.uniform(-3, 3)]
        u = np.r_[x[0] + rng.uniform(-0.4, 0.4), x[2] + rng.uniform(-0.4, 0.4), rng.uniform(-0.3, 0.3)]
        stance = StanceFoot.RIGHT if i % 2 else StanceFoot.LEFT
        _check(velocity_jacobian(x, stance, LIM)[1], central_jacobian(lambda y: velocity_residuals(y, stance, LIM), x))
        _, jx, ju = reachability_jacobian(x, u, LIM)
        _check(jx, central_jacobian(lambda y: reachability_residuals(y, u, LIM), x))
        _check(ju, central_jacobian(lambda v: reachability_residuals(x, v, LIM), u))
        _, jx, ju = maneuverability_jacobian(x, u, LIM)
        _check(jx, central_jacobian(lambda y: maneuverability_residuals(y, u, LIM), x))
        _check(ju, central_jacobian(lambda v: maneuverability_residuals(x, v, LIM), u))


def test_barrier_gradients_match_finite_differences():
    rng = np.random.default_rng(6)
    obs = random_obstacles(rng, 10)
    for _ in range(100):
        p = rng.uniform(-4, 4, 2)
        for ob in obs:
            num = central_jacobian(lambda q: np.array([ob.barrier(q[0], q[1])]), p)[0]
            _check(np.array(ob.barrier_grad(p[0], p[1])), num)


def _random_plan(rng, N):
    x0 = np.r_[rng.uniform(-2, 2), rng.uniform(-1, 1), rng.uniform(-2, 2), rng.uniform(-1, 1), rng.uniform(-3, 3)]
    X = np.empty((N, 5))
    U = np.empty((N, 3))
    prev = x0
    for k in range(N):
        U[k] = [prev[0] + rng.uniform(-0.4, 0.4), prev[2] + rng.uniform(-0.4, 0.4), rng.uniform(-0.3, 0.3)]
        X[k] = prev + rng.uniform(-0.5, 0.5, 5)
        prev = X[k]
    return x0, X, U


def test_bundle_jacobian_matches_finite_differences():
    rng = np.random.default_rng(7)
    for i in range(100):
        N = 1 + i % 3
        x0, X, U = _random_plan(rng, N)
        env = random_obstacles(rng, i % 4)
        stance = StanceFoot.RIGHT if i % 2 else StanceFoot.LEFT
        z = np.r_[X.ravel(), U.ravel()]

        def values(z):
            return constraint_bundle(z[: 5 * N].reshape(N, 5), z[5 * N :].reshape(N, 3), x0, stance, env, LIM, CBF).values

        b = constraint_bundle(X, U, x0, stance, env, LIM, CBF)
        _check(b.jacobian, central_jacobian(values, z))


# --- bundle ---------------------------------------------------------------


def test_bundle_cruise_is_feasible():
    # mid-range cruise; a right-stance step ends with positive lateral drift
    x0 = LipState(0, 0.6, 0, -0.25, 0.0)
    b = constraint_bundle([LipState(0.24, 0.6, 0, 0.25, 0.0)], [StepControl(0.1, 0.0, 0.0)], x0, StanceFoot.RIGHT, [], LIM, CBF)
    assert np.all(b.values >= 0)


def test_bundle_row_layout():
    rng = np.random.default_rng(8)
    x0, X, U = _random_plan(rng, 3)
    env = random_obstacles(rng, 8)
    b = constraint_bundle(X, U, x0, StanceFoot.RIGHT, env, LIM, CBF)
    assert len(b.dcbf_rows) == 24
    assert len(b.values) == 3 * (8 + 2 + 2 + 2 + 4)
    assert b.jacobian.shape == (len(b.values), 24)
    assert len(constraint_bundle(X, U, x0, StanceFoot.RIGHT, env, LIM, CBF, maneuverability=False).values) == 3 * 16


def test_duplicated_obstacle_doubles_dcbf_block():
    rng = np.random.default_rng(9)
    x0, X, U = _random_plan(rng, 3)
    ob = random_obstacles(rng, 1)
    one = constraint_bundle(X, U, x0, StanceFoot.LEFT, ob, LIM, CBF)
    two = constraint_bundle(X, U, x0, StanceFoot.LEFT, ob * 2, LIM, CBF)
    assert len(two.dcbf_rows) == 2 * len(one.dcbf_rows)
    assert np.array_equal(one.values[one.kinds != "dcbf"], two.values[two.kinds != "dcbf"])
    d1 = one.values[one.dcbf_rows]
    d2 = two.values[two.dcbf_rows].reshape(3, 2)
    assert np.array_equal(d2[:, 0], d1) and np.array_equal(d2[:, 1], d1)


def test_stance_parity_pattern():
    # a state with positive body lateral drift is legal only under right stance
    x0 = np.array([0, 0.6, 0, 0.25, 0.0])
    X = np.tile([0, 0.6, 0, 0.25, 0.0], (3, 1))
    U = np.tile([0.1, 0, 0], (3, 1))
    b = constraint_bundle(X, U, x0, StanceFoot.RIGHT, [], LIM, CBF)
    ok = [b.values[(b.kinds == "velocity") & (b.step == k)].min() >= 0 for k in range(3)]
    assert ok == [True, False, True]


def test_empty_horizon_rejected():
    with pytest.raises(ValueError):
        constraint_bundle(np.empty((0, 5)), np.empty((0, 3)), np.zeros(5), StanceFoot.RIGHT, [], LIM, CBF)


def _rotate_everything(phi, x0, X, U, env):
    c, s = math.cos(phi), math.sin(phi)
    R = np.array([[c, -s], [s, c]])

    def rot_state(x):
        p = R @ [x[0], x[2]]
        v = R @ [x[1], x[3]]
        return np.array([p[0], v[0], p[1], v[1], x[4] + phi])

    def rot_ob(ob):
        cx, cy = R @ [ob.center_x, ob.center_y]
        if isinstance(ob, Circle):
            return Circle(cx, cy, ob.radius)
        return Ellipse(cx, cy, ob.semi_major, ob.semi_minor, ob.rotation + phi)

    U2 = np.array([np.r_[R @ u[:2], u[2]] for u in U])
    return rot_state(x0), np.array([rot_state(x) for x in X]), U2, [rot_ob(o) for o in env]


def test_residuals_rotation_invariant():
    rng = np.random.default_rng(10)
    for _ in range(30):
        x0, X, U = _random_plan(rng, 3)
        env = random_obstacles(rng, 4)
        phi = rng.uniform(-math.pi, math.pi)
        a = constraint_bundle(X, U, x0, StanceFoot.RIGHT, env, LIM, CBF).values
        rx0, rX, rU, renv = _rotate_everything(phi, x0, X, U, env)
        b = constraint_bundle(rX, rU, rx0, StanceFoot.RIGHT, renv, LIM, CBF).values
        assert np.allclose(a, b, rtol=0, atol=1e-10)
