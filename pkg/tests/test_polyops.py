"""Unit tests for sparse polynomials and truncated power series."""

from __future__ import annotations

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from canard_lab.polyops import (
    Poly,
    poly_on_series,
    poly_on_series2,
    s2_add,
    s2_mul,
    ser_add,
    ser_compose_affine,
    ser_diff,
    ser_eval,
    ser_mul,
)


def test_constructors_prune_exact_zeros():
    assert not Poly(2, {(1, 0): 0.0})
    assert not Poly.const(0.0, 3)
    assert len(Poly(2, {(1, 0): 1.0, (0, 1): 0.0})) == 1
    assert Poly.zero(4) == Poly.const(0.0, 4)


def test_arithmetic_against_direct_evaluation():
    # p = 2 + 3x - y^2, q = 0.5 + x y
    p = Poly(2, {(0, 0): 2.0, (1, 0): 3.0, (0, 2): -1.0})
    q = Poly(2, {(0, 0): 0.5, (1, 1): 1.0})
    x, y = 1.7, -2.3
    pv = 2.0 + 3.0 * x - y**2
    qv = 0.5 + x * y
    pt = (x, y)
    assert_allclose((p + q)(pt), pv + qv, rtol=1e-14)
    assert_allclose((p - q)(pt), pv - qv, rtol=1e-14)
    assert_allclose((p * q)(pt), pv * qv, rtol=1e-14)
    assert_allclose((-p)(pt), -pv, rtol=1e-14)
    assert_allclose((p + 1.5)(pt), pv + 1.5, rtol=1e-14)
    assert_allclose((2.0 * p)(pt), 2.0 * pv, rtol=1e-14)
    assert_allclose((1.0 - p)(pt), 1.0 - pv, rtol=1e-14)


def test_pow_matches_repeated_multiplication():
    p = Poly(2, {(0, 0): 0.3, (1, 0): -1.2, (1, 1): 0.7})
    explicit = p * p * p * p * p
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1, 1, size=(8, 2))
    assert_allclose(
        (p**5).eval_many(pts), explicit.eval_many(pts), rtol=1e-12, atol=1e-15
    )
    assert (p**0) == Poly.const(1.0, 2)
    assert (p**1) == p


def test_deriv_matches_sympy():
    xs = sp.symbols("x0 x1 x2")
    expr = 2 * xs[0] ** 3 * xs[2] - sp.Rational(1, 2) * xs[1] ** 2 + xs[0] * xs[1] * xs[2]
    p = Poly(3, {(3, 0, 1): 2.0, (0, 2, 0): -0.5, (1, 1, 1): 1.0})
    rng = np.random.default_rng(1)
    pts = rng.uniform(-2, 2, size=(5, 3))
    for i in range(3):
        dp = p.deriv(i)
        dref = sp.lambdify(xs, sp.diff(expr, xs[i]), "numpy")
        for pt in pts:
            assert_allclose(dp(pt), dref(*pt), rtol=1e-13, atol=1e-13)


def test_compose_evaluates_like_substitution():
    p = Poly(2, {(2, 0): 1.0, (0, 1): -3.0, (1, 1): 0.5})
    q0 = Poly(3, {(1, 0, 0): 1.0, (0, 0, 2): -1.0})       # u - w^2
    q1 = Poly(3, {(0, 1, 0): 2.0, (0, 0, 0): 0.25})        # 2v + 1/4
    comp = p.compose([q0, q1])
    rng = np.random.default_rng(2)
    for pt in rng.uniform(-1, 1, size=(6, 3)):
        assert_allclose(comp(pt), p((q0(pt), q1(pt))), rtol=1e-12, atol=1e-14)


def test_subs_num_then_restrict_drops_variable():
    p = Poly(3, {(1, 2, 0): 2.0, (0, 0, 1): 1.0, (2, 0, 2): -1.0})
    q = p.subs_num(2, 0.5).restrict((0, 1))
    assert q.nvars == 2
    for pt in [(0.3, -1.2), (1.0, 2.0)]:
        assert_allclose(q(pt), p((pt[0], pt[1], 0.5)), rtol=1e-14)
    with pytest.raises(ValueError, match="still present"):
        p.restrict((0, 1))


def test_embed_places_variables():
    p = Poly(2, {(1, 2): 3.0})
    q = p.embed(4, (3, 1))
    assert q.terms == {(0, 2, 0, 1): 3.0}


def test_divide_by_var_is_exact_and_guarded():
    p = Poly(2, {(2, 1): 1.0, (3, 0): -2.0})
    q = p.divide_by_var(0, 2)
    assert q.terms == {(0, 1): 1.0, (1, 0): -2.0}
    assert q.mul_var(0, 2) == p
    with pytest.raises(ValueError, match="not divisible"):
        p.divide_by_var(1, 1)


def test_coeff_of_extracts_slice():
    p = Poly(2, {(0, 0): 1.0, (1, 1): 2.0, (2, 1): -1.0})
    c1 = p.coeff_of(0, 1)
    assert c1.terms == {(0, 1): 2.0}
    assert p.coeff_of(0, 0).terms == {(0, 0): 1.0}


def test_eval_many_matches_scalar_call():
    p = Poly(3, {(1, 0, 2): 1.5, (0, 3, 0): -0.25, (0, 0, 0): 2.0})
    rng = np.random.default_rng(3)
    pts = rng.uniform(-2, 2, size=(11, 3))
    vals = p.eval_many(pts)
    for k, pt in enumerate(pts):
        assert_allclose(vals[k], p(pt), rtol=1e-14)


def test_arrays_order_is_insertion_independent():
    a = Poly(2, {(1, 0): 1.0, (0, 1): 2.0, (2, 2): 3.0})
    b = Poly(2, {(2, 2): 3.0, (0, 1): 2.0, (1, 0): 1.0})
    ca, ea = a.arrays()
    cb, eb = b.arrays()
    assert np.array_equal(ca, cb)
    assert np.array_equal(ea, eb)


small_coeffs = st.floats(-4.0, 4.0, allow_nan=False, allow_infinity=False)
small_expts = st.tuples(st.integers(0, 3), st.integers(0, 3))


@st.composite
def polys2(draw):
    terms = draw(st.dictionaries(small_expts, small_coeffs, max_size=5))
    return Poly(2, terms)


@settings(max_examples=60, deadline=None)
@given(polys2(), polys2(), st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_ring_homomorphism_property(p, q, x, y):
    pt = (x, y)
    pv, qv = p(pt), q(pt)
    scale = 1.0 + abs(pv) + abs(qv)
    assert abs((p + q)(pt) - (pv + qv)) <= 1e-9 * scale
    assert abs((p * q)(pt) - pv * qv) <= 1e-9 * scale * scale


# ---------------------------------------------------------------------
# Series helpers.
# ---------------------------------------------------------------------


def test_ser_basics():
    a = np.array([1.0, 2.0])
    b = np.array([0.5, 0.0, -1.0])
    assert_allclose(ser_add(a, b), [1.5, 2.0, -1.0])
    full = np.polynomial.polynomial.polymul(a, b)
    assert_allclose(ser_mul(a, b, 10), full)
    assert_allclose(ser_mul(a, b, 2), full[:2])
    assert_allclose(ser_diff(np.array([3.0, 1.0, 4.0])), [1.0, 8.0])
    assert_allclose(ser_eval(np.array([1.0, 0.0, 2.0]), 0.5), 1.5)


def test_ser_compose_affine_matches_pointwise():
    p = np.array([1.0, -2.0, 0.0, 3.0])  # 1 - 2u + 3u^3
    c0, c1 = 0.4, -1.1
    comp = ser_compose_affine(p, c0, c1, 10)
    for v in (0.0, 0.2, -0.7):
        u = c0 + c1 * v
        direct = 1.0 - 2.0 * u + 3.0 * u**3
        assert_allclose(ser_eval(comp, v), direct, rtol=1e-13)


def test_poly_on_series_matches_pointwise_evaluation():
    # p(x, y, z) with x, z replaced by series in v and y by a scalar.
    p = Poly(3, {(2, 0, 0): 1.0, (0, 1, 1): -2.0, (1, 0, 2): 0.5})
    a = np.array([0.3, 1.0, -0.2])       # x(v)
    b = np.array([-1.0, 0.5])            # z(v)
    n = 12                               # beyond exact degree: no truncation
    out = poly_on_series(p, [a, 2.0, b], n)
    for v in (0.0, 0.3, -0.6):
        xv, zv = ser_eval(a, v), ser_eval(b, v)
        assert_allclose(
            ser_eval(out, v), p((xv, 2.0, zv)), rtol=1e-13, atol=1e-14
        )


def test_poly_on_series2_flattens_consistently():
    # Two-level series in (r, v): substituting numbers for r must agree
    # with the flat single-series route.
    p = Poly(3, {(1, 0, 1): 1.0, (0, 2, 0): -0.5, (2, 1, 0): 2.0})
    xs2 = [np.array([0.2]), np.array([0.0, 1.0]), np.array([-0.3, 0.0, 0.5])]
    ys2 = [np.array([1.0, -1.0]), np.array([0.7])]
    nr = 6
    out2 = poly_on_series2(p, [xs2, ys2, 0.4], nr)
    assert len(out2) == nr
    for r in (0.0, 0.5, 1.0):
        # Flatten each two-level operand at this r.
        def flat(series2):
            acc = np.zeros(1)
            for k, c in enumerate(series2):
                acc = ser_add(acc, c * r**k)
            return acc

        flat_out = np.zeros(1)
        for k, c in enumerate(out2):
            flat_out = ser_add(flat_out, c * r**k)
        ref = poly_on_series(p, [flat(xs2), flat(ys2), 0.4], 64)
        for v in (0.0, 0.25, -0.5):
            assert_allclose(
                ser_eval(flat_out, v), ser_eval(ref, v), rtol=1e-12, atol=1e-13
            )


def test_s2_mul_truncates_in_r():
    a = [np.array([1.0]), np.array([0.0, 1.0])]        # 1 + r v
    b = [np.array([2.0]), np.array([3.0])]             # 2 + 3 r
    prod = s2_mul(a, b, 2)
    # (1 + r v)(2 + 3r) = 2 + r(3 + 2v) + O(r^2)
    assert_allclose(prod[0], [2.0])
    assert_allclose(prod[1], [3.0, 2.0])
    total = s2_add(a, b)
    assert_allclose(total[0], [3.0])
    assert_allclose(total[1], [3.0, 1.0])
