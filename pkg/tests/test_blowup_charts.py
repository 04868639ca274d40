"""Chart maps, blow-downs, and the desingularized chart fields."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy.integrate import simpson

from canard_lab.blowup_charts import (
    Chart1Point,
    Chart2Point,
    blow_down_chart1,
    blow_down_chart2,
    chart1_field,
    chart1_field_polys,
    chart1_to_chart2,
    chart2_field,
    chart2_field_polys,
    chart2_to_chart1,
    field_chart1,
    field_chart2,
)
from canard_lab.numerics import integrate
from canard_lab.polyops import Poly


def test_blow_down_chart1_examples():
    xyz, eps = blow_down_chart1(Chart1Point(1.0, 0.1, 0.2, 0.3))
    assert_allclose(xyz, [-0.01, 0.02, 0.03], rtol=1e-15)
    assert_allclose(eps, 0.01, rtol=1e-15)

    xyz, eps = blow_down_chart1(Chart1Point(0.7, 0.0, 5.0, -3.0))
    assert_allclose(xyz, [0.0, 0.0, 0.0], atol=0.0)
    assert eps == 0.0

    xyz, eps = blow_down_chart1(Chart1Point(4.0, 0.5, 1.0, 1.0))
    assert_allclose(xyz, [-0.25, 0.5, 0.5], rtol=1e-15)
    assert_allclose(eps, 1.0, rtol=1e-15)


def test_blow_down_chart2_examples():
    xyz, eps = blow_down_chart2(Chart2Point(0.1, -1.0, 0.2, 0.3))
    assert_allclose(xyz, [-0.01, 0.02, 0.03], rtol=1e-15)
    assert_allclose(eps, 0.01, rtol=1e-15)

    xyz, eps = blow_down_chart2(Chart2Point(0.0, 2.0, -1.0, 4.0))
    assert_allclose(xyz, [0.0, 0.0, 0.0], atol=0.0)
    assert eps == 0.0

    xyz, eps = blow_down_chart2(Chart2Point(1.0, 1.0, 1.0, 1.0))
    assert_allclose(xyz, [1.0, 1.0, 1.0], rtol=1e-15)
    assert eps == 1.0


def test_chart_change_examples():
    q = chart1_to_chart2(Chart1Point(1.0, 0.1, 0.2, 0.3))
    assert_allclose([q.r2, q.x2, q.y2, q.z2], [0.1, -1.0, 0.2, 0.3], rtol=1e-15)

    q = chart1_to_chart2(Chart1Point(4.0, 0.5, 1.0, 1.0))
    assert_allclose([q.r2, q.x2, q.y2, q.z2], [1.0, -0.25, 0.5, 0.5], rtol=1e-15)


def test_chart_change_commutes_with_blow_down():
    p = Chart1Point(0.25, 0.2, 0.1, -0.4)
    xyz_direct, eps_direct = blow_down_chart1(p)
    xyz_via2, eps_via2 = blow_down_chart2(chart1_to_chart2(p))
    assert np.max(np.abs(xyz_direct - xyz_via2)) < 1e-14
    assert abs(eps_direct - eps_via2) < 1e-14


def test_chart_change_round_trip():
    p = Chart1Point(0.8, 0.3, -0.2, 0.5)
    back = chart2_to_chart1(chart1_to_chart2(p))
    assert_allclose(
        [back.eps1, back.r1, back.y1, back.z1],
        [p.eps1, p.r1, p.y1, p.z1], rtol=1e-14,
    )
    q = Chart2Point(0.2, -1.7, 0.4, -0.9)
    there = chart1_to_chart2(chart2_to_chart1(q))
    assert_allclose(
        [there.r2, there.x2, there.y2, there.z2],
        [q.r2, q.x2, q.y2, q.z2], rtol=1e-14,
    )


@settings(max_examples=50, deadline=None)
@given(
    st.floats(1e-3, 1e3), st.floats(0.0, 10.0),
    st.floats(-10.0, 10.0), st.floats(-10.0, 10.0),
)
def test_chart_change_round_trip_property(eps1, r1, y1, z1):
    p = Chart1Point(eps1, r1, y1, z1)
    back = chart2_to_chart1(chart1_to_chart2(p))
    assert np.allclose(
        [back.eps1, back.r1, back.y1, back.z1],
        [p.eps1, p.r1, p.y1, p.z1], rtol=1e-12, atol=1e-15,
    )


def test_chart_change_domain_errors():
    with pytest.raises(ValueError, match="eps1 > 0"):
        chart1_to_chart2(Chart1Point(0.0, 0.1, 0.2, 0.3))
    with pytest.raises(ValueError, match="x2 < 0"):
        chart2_to_chart1(Chart2Point(0.1, 0.0, 0.2, 0.3))


def test_point_invariants_enforced():
    with pytest.raises(ValueError, match="eps1 >= 0"):
        Chart1Point(-0.1, 0.0, 0.0, 0.0)
    with pytest.raises(ValueError, match="r1 >= 0"):
        Chart1Point(0.1, -1.0, 0.0, 0.0)
    with pytest.raises(ValueError, match="r2 >= 0"):
        Chart2Point(-0.5, 0.0, 0.0, 0.0)


def test_point_state_round_trip():
    p = Chart1Point(0.3, 0.2, -0.1, 0.9)
    assert Chart1Point.from_state(p.state) == p
    q = Chart2Point(0.05, -1.0, 0.4, 0.2)
    assert Chart2Point.from_state(q.state, q.r2) == q


# ---------------------------------------------------------------------
# Chart-2 field.
# ---------------------------------------------------------------------


def test_field_chart2_layer_examples(canonical):
    v = field_chart2(canonical, Chart2Point(0.0, 0.0, 0.0, 0.0), 0.0)
    assert_allclose(v, [0.0, 0.0, 0.0], atol=0.0)

    v = field_chart2(canonical, Chart2Point(0.0, -1.0, 0.0, 0.0), 0.0)
    assert_allclose(v, [0.0, 0.0, -1.0], rtol=1e-15)

    v = field_chart2(canonical, Chart2Point(0.1, 0.0, 1.0, 0.0), 0.0)
    assert_allclose(v, [1.0, 0.0, 0.0], atol=1e-16)


def test_field_chart2_critical_curve_is_equilibria_at_zero(canonical):
    # At r2 = mu = 0 the curve x2 = -y2^2, z2 = y2 consists of equilibria.
    for a in (-0.4, 0.1, 0.7):
        v = field_chart2(canonical, Chart2Point(0.0, -(a**2), a, a), 0.0)
        assert_allclose(v, [0.0, 0.0, 0.0], atol=1e-16)


def test_field_chart2_matches_ambient_pullback(generic):
    # Oracle: the chart-2 field is the ambient fast field scaled by
    # (1/r2^3, 1/r2^2, 1/r2^2) at the blown-down point.
    r2, mu = 0.3, 0.07
    ambient = generic.fast_field(eps=r2**2, mu=mu)
    rng = np.random.default_rng(11)
    for x2, y2, z2 in rng.uniform(-1.0, 1.0, size=(8, 3)):
        p = Chart2Point(r2, x2, y2, z2)
        xyz, _eps = blow_down_chart2(p)
        v_amb = ambient(xyz)
        expected = np.array([v_amb[0] / r2**3, v_amb[1] / r2**2, v_amb[2] / r2**2])
        assert_allclose(field_chart2(generic, p, mu), expected, rtol=1e-11, atol=1e-13)


def test_chart2_field_object_matches_pointwise(generic):
    r2, mu = 0.12, -0.04
    fld = chart2_field(generic, r2, mu)
    assert fld.nstate == 3
    pt = np.array([-0.8, 0.3, 0.4])
    assert_allclose(
        fld(pt), field_chart2(generic, Chart2Point(r2, *pt), mu), rtol=1e-14
    )


# ---------------------------------------------------------------------
# Chart-1 field.
# ---------------------------------------------------------------------


def test_field_chart1_equilibrium_line(canonical, generic):
    for system in (canonical, generic):
        for y1 in (-2.0, 0.0, 1.5):
            v = field_chart1(system, Chart1Point(0.0, 0.0, y1, -1.0), 0.0)
            assert_allclose(v, np.zeros(4), atol=1e-16)
            v = field_chart1(system, Chart1Point(0.0, 0.0, y1, 1.0), 0.0)
            assert_allclose(v, np.zeros(4), atol=1e-16)


def test_field_chart1_origin_example(canonical):
    v = field_chart1(canonical, Chart1Point(0.0, 0.0, 0.0, 0.0), 0.0)
    assert_allclose(v, [0.0, 0.0, 0.0, -1.0], atol=0.0)


def test_field_chart1_normal_attraction_rates(generic):
    # d(z1')/dz1 = 2 z1 at the equilibrium lines: -2 attracting, +2 repelling.
    fld = chart1_field(generic, 0.0)
    for z1, rate in ((-1.0, -2.0), (1.0, 2.0)):
        jac = fld.jacobian(np.array([0.0, 0.0, 0.4, z1]))
        assert_allclose(jac[3, 3], rate, rtol=1e-14)


def test_field_chart1_matches_ambient_pullback(generic):
    # With t1 the chart time, the blow-down coordinates obey
    #   d(x)/dt1 = -2 r1 r1' = fast_x / r1,
    #   d(y)/dt1 = r1 y1' + y1 r1' = fast_y / r1,
    #   d(z)/dt1 = r1 z1' + z1 r1' = fast_z / r1,
    # which pins every component of the desingularized field.
    mu = 0.08
    rng = np.random.default_rng(13)
    for _ in range(8):
        eps1, r1 = rng.uniform(0.2, 1.5), rng.uniform(0.05, 0.4)
        y1, z1 = rng.uniform(-0.8, 0.8, size=2)
        p = Chart1Point(eps1, r1, y1, z1)
        xyz, eps = blow_down_chart1(p)
        fast = generic.fast_field(eps=eps, mu=mu)(xyz)
        v = field_chart1(generic, p, mu)
        assert_allclose(-2.0 * r1 * v[1], fast[0] / r1, rtol=1e-11, atol=1e-14)
        assert_allclose(r1 * v[2] + y1 * v[1], fast[1] / r1, rtol=1e-11, atol=1e-14)
        assert_allclose(r1 * v[3] + z1 * v[1], fast[2] / r1, rtol=1e-11, atol=1e-14)
        # eps = r1^2 eps1 momentarily conserved.
        assert abs(r1**2 * v[0] + 2.0 * r1 * eps1 * v[1]) < 1e-15


def test_eps_conservation_is_symbolic(generic, canonical):
    # r1^2 * deps1/dt + 2 r1 eps1 * dr1/dt is the zero polynomial.
    for system in (canonical, generic):
        fe, fr, _fy, _fz = chart1_field_polys(system)
        eps1, r1 = Poly.var(0, 5), Poly.var(1, 5)
        combo = r1 * r1 * fe + 2.0 * (r1 * eps1 * fr)
        assert not combo.terms


def test_eps_conservation_along_trajectories(generic):
    fld = chart1_field(generic, 0.05)
    y0 = np.array([0.3, 0.3, 0.1, -0.9])
    tr = integrate(fld, y0, (0.0, 1.0))
    eps_along = tr.ys[:, 1] ** 2 * tr.ys[:, 0]
    assert np.max(np.abs(eps_along - eps_along[0])) < 1e-10


def test_pushforward_consistency_finite_difference(canonical):
    # Spec point: pushing field_chart1 through the chart change equals
    # sqrt(eps1) times field_chart2 at the image.
    p = Chart1Point(1.0, 0.1, 0.2, 0.3)
    mu = 0.05
    v1 = field_chart1(canonical, p, mu)
    q = chart1_to_chart2(p)

    def chart_map(state):
        pt = Chart1Point(*state)
        img = chart1_to_chart2(pt)
        return np.array([img.x2, img.y2, img.z2])

    step = 1e-6
    jac = np.empty((3, 4))
    state0 = p.state
    for j in range(4):
        dp = np.zeros(4)
        dp[j] = step
        jac[:, j] = (chart_map(state0 + dp) - chart_map(state0 - dp)) / (2 * step)
    pushed = jac @ v1
    v2 = field_chart2(canonical, q, mu)
    assert np.max(np.abs(pushed - np.sqrt(p.eps1) * v2)) < 1e-10


def test_pushforward_consistency_exact_jacobian(generic):
    # Same consistency with the analytic Jacobian of the chart change.
    mu = -0.03
    rng = np.random.default_rng(17)
    for _ in range(6):
        eps1 = rng.uniform(0.3, 2.0)
        r1 = rng.uniform(0.0, 0.4)
        y1, z1 = rng.uniform(-0.7, 0.7, size=2)
        p = Chart1Point(eps1, r1, y1, z1)
        s = np.sqrt(eps1)
        jac = np.array([
            [1.0 / eps1**2, 0.0, 0.0, 0.0],
            [-0.5 * y1 / s**3, 0.0, 1.0 / s, 0.0],
            [-0.5 * z1 / s**3, 0.0, 0.0, 1.0 / s],
        ])
        pushed = jac @ field_chart1(generic, p, mu)
        v2 = field_chart2(generic, chart1_to_chart2(p), mu)
        assert_allclose(pushed, s * v2, rtol=1e-11, atol=1e-13)


def test_chart_change_equivariance_along_orbits(generic):
    # Integrate in chart 1, transport the endpoint, and compare with the
    # chart-2 orbit run for the reparametrized time t2 = int sqrt(eps1) dt1.
    mu = 0.05
    fld1 = chart1_field(generic, mu)
    rng = np.random.default_rng(19)
    for _ in range(10):
        state0 = np.array([
            rng.uniform(0.5, 1.5), rng.uniform(0.0, 0.3),
            rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
        ])
        t_span = 0.3
        tr = integrate(fld1, state0, (0.0, t_span))
        p0 = Chart1Point.from_state(state0)
        q0 = chart1_to_chart2(p0)
        q1 = chart1_to_chart2(Chart1Point.from_state(tr.end))
        assert abs(q1.r2 - q0.r2) < 1e-10  # r2 conserved across the change

        ts = np.linspace(0.0, t_span, 2001)
        t2 = simpson(np.sqrt(tr.sol(ts)[:, 0]), x=ts)
        fld2 = chart2_field(generic, q0.r2, mu)
        tr2 = integrate(fld2, q0.state, (0.0, t2))
        assert np.max(np.abs(tr2.end - q1.state)) < 1e-7


def test_chart2_field_polys_layer_limit(canonical, generic):
    # r2 = mu = 0 leaves the planar layer equations in every system.
    for system in (canonical, generic):
        polys = [
            p.subs_num(3, 0.0).subs_num(4, 0.0).restrict((0, 1, 2))
            for p in chart2_field_polys(system)
        ]
        x2, y2, z2 = Poly.var(0, 3), Poly.var(1, 3), Poly.var(2, 3)
        assert polys[0] == y2 - z2
        assert not polys[1].terms
        assert polys[2] == x2 + z2 * z2
