"""Layer-problem closed forms, periodic orbits, and conservation."""

from __future__ import annotations

import numpy as np
import pytest
import sympy as sp
from numpy.testing import assert_allclose

from canard_lab.blowup_charts import chart2_field_polys, field_chart2
from canard_lab.layer_dynamics import (
    c2_linearization,
    c2_point,
    classify_C2,
    first_integral,
    layer_field,
    periodic_orbit,
    strong_canard_point,
    write_orbit_csv,
)
from canard_lab.polyops import Poly


def test_first_integral_examples():
    assert first_integral(0.5, 0.0) == 0.0
    assert_allclose(first_integral(-0.5, 0.0), -np.exp(-1.0), rtol=1e-15)
    for t2 in (-1.0, 0.0, 2.0):
        p = strong_canard_point(0.0, t2)
        assert abs(first_integral(p.x2, p.z2)) < 1e-15


def test_first_integral_derivative_vanishes_symbolically():
    x, z = sp.symbols("x z")
    ham = (x + z**2 - sp.Rational(1, 2)) * sp.exp(2 * x)
    dot = sp.diff(ham, x) * (-z) + sp.diff(ham, z) * (x + z**2)
    assert sp.simplify(dot) == 0


def test_strong_canard_examples():
    p = strong_canard_point(0.0, 0.0)
    assert (p.x2, p.y2, p.z2, p.r2) == (0.5, 0.0, 0.0, 0.0)
    p = strong_canard_point(0.0, 2.0)
    assert (p.x2, p.y2, p.z2) == (-0.5, 0.0, 1.0)
    p = strong_canard_point(0.3, 2.0)
    assert (p.x2, p.y2, p.z2) == (-0.5, 0.3, 1.0)


def test_strong_canard_solves_chart2_equations(canonical, generic):
    rng = np.random.default_rng(23)
    for system in (canonical, generic):
        for mu, t2 in zip(rng.uniform(-0.5, 0.5, 20), rng.uniform(-3, 3, 20)):
            p = strong_canard_point(mu, t2)
            velocity = np.array([-0.5 * t2, 0.5 * mu, 0.5])
            residual = field_chart2(system, p, mu) - velocity
            assert np.max(np.abs(residual)) < 1e-12


def test_layer_field_is_chart2_limit(generic):
    y2_val = 0.37
    polys = [
        p.subs_num(3, 0.0).subs_num(4, 0.0).subs_num(1, y2_val).restrict((0, 2))
        for p in chart2_field_polys(generic)
    ]
    frozen = layer_field(y2_val)
    assert polys[0] == frozen.polys[0]
    assert polys[2] == frozen.polys[1]
    assert not polys[1].terms  # y2 freezes in the layer limit


def test_small_amplitude_period_approaches_2pi():
    assert abs(periodic_orbit(1e-3).period - 2 * np.pi) < 1e-2


def test_period_decreases_monotonically_to_2pi():
    periods = np.array([periodic_orbit(2.0**-k).period for k in range(1, 9)])
    assert np.all(np.diff(periods) < 0)  # decreasing along shrinking h
    assert np.all(periods > 2 * np.pi)
    assert periods[-1] - 2 * np.pi < 2e-5


@pytest.mark.parametrize("h", [0.1, 0.5, 1.0, 2.0])
def test_orbit_conservation_and_closure(h):
    orbit = periodic_orbit(h)
    assert orbit.period > 0
    assert orbit.conservation_defect < 1e-9
    assert_allclose(orbit.samples.end, [-h, 0.0], atol=1e-9)
    assert_allclose(orbit.samples.ys[0], [-h, 0.0], atol=0.0)


def test_orbit_time_reversal_symmetry():
    orbit = periodic_orbit(0.5)
    period = orbit.period
    ts = np.linspace(0.0, period, 201)
    fwd = orbit.samples.sol(ts)
    bwd = orbit.samples.sol(period - ts)
    assert np.max(np.abs(fwd[:, 0] - bwd[:, 0])) < 1e-8
    assert np.max(np.abs(fwd[:, 1] + bwd[:, 1])) < 1e-8


def test_orbit_rejects_nonpositive_amplitude():
    with pytest.raises(ValueError, match="positive"):
        periodic_orbit(0.0)
    with pytest.raises(ValueError, match="positive"):
        periodic_orbit(-0.3)


def test_level_values_nest_with_amplitude():
    hs = np.linspace(0.05, 3.0, 40)
    levels = first_integral(-hs, np.zeros_like(hs))
    assert np.all(np.diff(levels) > 0)
    assert np.all(levels < 0)


def test_classify_c2_and_linearization():
    assert classify_C2(-0.2) == "attracting"
    assert classify_C2(0.2) == "repelling"
    assert classify_C2(0.0) == "degenerate"

    _jac, eigs = c2_linearization(0.0)
    assert_allclose(np.sort_complex(eigs), [-1j, 1j], atol=1e-12)
    for y2 in (-0.5, 0.5):
        _jac, eigs = c2_linearization(y2)
        assert np.all(np.sign(eigs.real) == np.sign(y2))
        point = c2_point(y2)
        assert (point.x2, point.z2) == (-(y2**2), y2)


def test_write_orbit_csv_round_trip(tmp_path):
    orbit = periodic_orbit(0.25)
    path = tmp_path / "orbit.csv"
    write_orbit_csv(orbit, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "t,x2,z2,H"
    assert len(lines) == orbit.samples.ts.size + 1
    first = np.array([float(v) for v in lines[1].split(",")])
    assert_allclose(first, [0.0, -0.25, 0.0, first_integral(-0.25, 0.0)],
                    atol=0.0)
