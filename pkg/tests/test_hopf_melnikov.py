"""Tests for the Melnikov construction of small cycles and the Hopf curve.

Oracles used here, independent of the implementation under test:

* the layer problem at r2 = 0, y2 = 0 in straightened coordinates,
  (du1, du2) = (-u2, u1 + u2^2), read off the scaling-chart equations;
* the closed-form displacement derivatives at the layer orbits:
  d(d2)/dmu2 = T0(h)/2 (exact linearity in mu2 at r2 = 0),
  d(d1_hat)/dy2 = -2 int_0^T0 e^{int_t^T 2 z2h} (z2h/h)^2 dt evaluated
  by Simpson quadrature on a dense orbit,
  the h = 0 limits (-2pi, 0; 2pi*lam, pi);
* a direct shooting solver for the same fixed point that shares no
  Melnikov machinery, and an eigenvalue route to the Hopf curve that
  shares nothing at all.
"""

import csv

import numpy as np
import pytest
from scipy.integrate import simpson

from canard_lab.blowup_charts import chart2_field
from canard_lab.hopf_melnikov import (
    MelnikovValue,
    SmallBranchPoint,
    StraightenedState,
    adjoint_solution,
    chart2_equilibrium,
    hopf_mu,
    hopf_mu_eigenvalue,
    melnikov,
    melnikov_jacobian_fd,
    return_map_fixed_point,
    solve_small_branch,
    straightened_field,
    straightened_polys,
    write_branch_csv,
)
from canard_lab.layer_dynamics import layer_field, periodic_orbit
from canard_lab.numerics import PolyField, integrate
from canard_lab.polyops import Poly
from canard_lab.slow_manifold import solve_invariant_series


@pytest.fixture(scope="module")
def res0(canonical):
    """Critical-curve frame of the canonical system (r2 = 0)."""
    return solve_invariant_series(canonical, 0.0, 0.0, nu=0.2, N=8)


@pytest.fixture(scope="module")
def branch_point(canonical):
    return solve_small_branch(canonical, 0.5, 0.05)


def _layer_quadrature_slope(h, n=4001):
    """-2 int_0^T0 e^{int_t^T 2 z2h ds} (z2h / h)^2 dt by Simpson."""
    T0 = periodic_orbit(h).period
    base = layer_field(0.0).polys
    polys = [p.embed(3, (0, 1)) for p in base]
    polys.append(Poly(3, {(0, 1, 0): 2.0}))
    traj = integrate(PolyField(polys), np.array([-h, 0.0, 0.0]), (0.0, T0))
    ts = np.linspace(0.0, T0, n)
    states = np.atleast_2d(traj.sol(ts))
    z, integ = states[:, 1], states[:, 2]
    i_end = traj.end[2]
    return -2.0 * simpson(np.exp(i_end - integ) * (z / h) ** 2, x=ts)


# ---------------------------------------------------------------------
# Straightened coordinates.
# ---------------------------------------------------------------------


def test_manifold_is_invariant_in_straightened_coordinates(canonical, generic):
    for system in (canonical, generic):
        res = solve_invariant_series(system, 0.05, 0.1, nu=0.2, N=30)
        du1, du2, _ = straightened_polys(system, res)
        for y2 in np.linspace(-0.15, 0.15, 11):
            point = (0.0, 0.0, y2)
            assert abs(du1(point)) <= 1e-13
            assert abs(du2(point)) <= 1e-13


def test_straightened_system_reduces_to_layer_problem(canonical, res0):
    du1, du2, q = straightened_polys(canonical, res0)
    for u1, u2 in [(0.3, -0.2), (1.0, 0.5), (-0.7, 1.1)]:
        point = (u1, u2, 0.0)
        assert du1(point) == pytest.approx(-u2, abs=1e-15)
        assert du2(point) == pytest.approx(u1 + u2**2, abs=1e-15)
    assert q((0.0, 0.0, 0.0)) == pytest.approx(0.0, abs=1e-15)


def test_straightened_slow_factor_carries_mu2(canonical):
    res = solve_invariant_series(canonical, 0.0, 0.08, nu=0.2, N=8)
    _, _, q = straightened_polys(canonical, res)
    assert q((0.0, 0.0, 0.0)) == pytest.approx(0.04, abs=1e-15)


def test_straightened_linearization_is_a_center(canonical, res0):
    du1, du2, _ = straightened_polys(canonical, res0)
    origin = (0.0, 0.0, 0.0)
    jac = np.array([
        [du1.deriv(0)(origin), du1.deriv(1)(origin)],
        [du2.deriv(0)(origin), du2.deriv(1)(origin)],
    ])
    assert np.allclose(jac, [[0.0, -1.0], [1.0, 0.0]], atol=1e-14)
    eigs = np.sort_complex(np.linalg.eigvals(jac))
    assert np.allclose(eigs, [-1j, 1j], atol=1e-14)


def test_straightened_field_wrapper_and_validation(canonical):
    res = solve_invariant_series(canonical, 0.05, 0.1, nu=0.2, N=30)
    du1, du2, q = straightened_polys(canonical, res)
    state = StraightenedState((0.01, -0.02), 0.1)
    vel = straightened_field(canonical, res, state, 0.05, 0.1)
    point = (0.01, -0.02, 0.1)
    assert vel == pytest.approx(
        [du1(point), du2(point), 0.05 * q(point)], abs=1e-15
    )
    with pytest.raises(ValueError, match="manifold was computed at"):
        straightened_field(canonical, res, state, 0.02, 0.1)
    with pytest.raises(ValueError, match="outside the manifold validity"):
        straightened_field(
            canonical, res, StraightenedState((0.0, 0.0), 0.5), 0.05, 0.1
        )
    with pytest.raises(ValueError, match="2-vector"):
        StraightenedState((1.0, 2.0, 3.0), 0.0)


# ---------------------------------------------------------------------
# Melnikov displacements.
# ---------------------------------------------------------------------


@pytest.mark.parametrize("h", [0.2, 0.5, 1.0])
def test_displacements_vanish_on_layer_orbits(canonical, res0, h):
    val = melnikov(canonical, res0, h, 0.0, 0.0, 0.0)
    assert abs(val.d1_hat) <= 1e-9
    assert abs(val.d2) <= 1e-9
    assert val.transition_time == pytest.approx(
        periodic_orbit(h).period, abs=1e-9
    )


def test_zero_amplitude_is_regular(canonical, res0):
    val = melnikov(canonical, res0, 0.0, 0.0, 0.0, 0.0)
    assert abs(val.d1_hat) <= 1e-9
    assert abs(val.d2) <= 1e-12
    assert val.transition_time == pytest.approx(2.0 * np.pi, abs=1e-6)
    assert val.d1 == 0.0


def test_radial_displacement_scaling(canonical):
    res = solve_invariant_series(canonical, 0.05, 0.1, nu=0.2, N=30)
    val = melnikov(canonical, res, 0.5, 0.02, 0.05, 0.1)
    assert val.d1 == pytest.approx(0.5 * val.d1_hat, abs=0.0)
    assert isinstance(val, MelnikovValue)


def test_melnikov_input_validation(canonical, res0):
    with pytest.raises(ValueError, match="nonnegative"):
        melnikov(canonical, res0, -0.1, 0.0, 0.0, 0.0)
    with pytest.raises(ValueError, match="manifold was computed at"):
        melnikov(canonical, res0, 0.5, 0.0, 0.05, 0.0)


def test_adjoint_pairing_identity(canonical, res0):
    """The pairing integral equals psi(T) . (w(T) - Phi(T)) exactly."""
    h = 0.5
    _, traj = melnikov(canonical, res0, h, 0.05, 0.0, 0.0, full_output=True)
    end = traj.end
    w, phi, e_end, ipsi = end[0:2], end[3:5], end[5], end[6]
    psi_end = -e_end * np.array([phi[0] + h * phi[1] ** 2, phi[1]])
    assert ipsi == pytest.approx(psi_end @ (w - phi), abs=1e-9)


# ---------------------------------------------------------------------
# The adjoint solution.
# ---------------------------------------------------------------------


def test_adjoint_normalization_and_periodicity():
    T0 = periodic_orbit(0.5).period
    assert adjoint_solution(0.5, T0, T0) == pytest.approx([1.0, 0.0], abs=1e-10)
    assert adjoint_solution(0.5, 0.0, T0) == pytest.approx([1.0, 0.0], abs=1e-10)
    assert adjoint_solution(0.5, T0) == pytest.approx([1.0, 0.0], abs=1e-10)


def test_adjoint_satisfies_adjoint_equation():
    h, dt = 0.5, 1e-6
    T0 = periodic_orbit(h).period
    base = layer_field(0.0).polys
    polys = [p.embed(3, (0, 1)) for p in base]
    polys.append(Poly(3, {(0, 1, 0): 2.0}))
    traj = integrate(PolyField(polys), np.array([-h, 0.0, 0.0]), (0.0, T0))
    for t in np.linspace(0.5, T0 - 0.5, 9):
        pair = adjoint_solution(h, [t - dt, t + dt], T0)
        dpsi = (pair[1] - pair[0]) / (2.0 * dt)
        z = traj.sol(t)[1]
        a_t = np.array([[0.0, -1.0], [1.0, 2.0 * z]])
        assert np.abs(dpsi + a_t.T @ adjoint_solution(h, t, T0)).max() <= 1e-8


def test_adjoint_small_amplitude_limit():
    h = 1e-3
    T0 = periodic_orbit(h).period
    ts = np.linspace(0.0, T0, 25)
    psis = adjoint_solution(h, ts, T0)
    ref = np.stack([np.cos(ts), np.sin(ts)], axis=-1)
    assert np.abs(psis).max() <= 1.1
    assert np.abs(psis - ref).max() <= 1e-2


def test_adjoint_input_validation():
    with pytest.raises(ValueError, match="positive"):
        adjoint_solution(0.0, 0.0, 1.0)
    with pytest.raises(ValueError, match="lie in"):
        adjoint_solution(0.5, -0.5, 6.0)


# ---------------------------------------------------------------------
# Displacement derivatives against closed forms.
# ---------------------------------------------------------------------


@pytest.mark.parametrize("h", [0.25, 0.5, 1.0])
def test_slow_derivative_is_half_period(canonical, h):
    jac = melnikov_jacobian_fd(canonical, h)
    half_period = periodic_orbit(h).period / 2.0
    assert jac[1, 1] == pytest.approx(half_period, rel=1e-4)
    assert abs(jac[0, 1]) <= 1e-8


def test_slow_derivative_generic_system(generic):
    jac = melnikov_jacobian_fd(generic, 0.5)
    half_period = periodic_orbit(0.5).period / 2.0
    assert jac[1, 1] == pytest.approx(half_period, rel=1e-4)
    assert abs(jac[0, 1]) <= 1e-8


def test_radial_derivative_matches_quadrature(canonical, generic):
    jac = melnikov_jacobian_fd(canonical, 0.5)
    assert jac[0, 0] == pytest.approx(_layer_quadrature_slope(0.5), rel=1e-4)
    # at r2 = 0 the straightened planar system is the same for every
    # normal form, so this column does not depend on the tables
    jac_gen = melnikov_jacobian_fd(generic, 0.5)
    assert jac_gen[0, 0] == pytest.approx(jac[0, 0], abs=1e-7)


def test_derivative_limits_at_zero_amplitude(canonical, generic):
    jac = melnikov_jacobian_fd(canonical, 0.0)
    assert jac[0, 0] == pytest.approx(-2.0 * np.pi, abs=1e-3)
    assert jac[1, 1] == pytest.approx(np.pi, abs=1e-4)
    assert abs(jac[0, 1]) <= 1e-10
    assert jac[1, 0] == pytest.approx(2.0 * np.pi * canonical.lam, abs=1e-6)
    jac_gen = melnikov_jacobian_fd(generic, 0.0)
    assert jac_gen[1, 0] == pytest.approx(2.0 * np.pi * generic.lam, abs=1e-6)


def test_displacement_jacobian_is_uniformly_invertible(canonical):
    for h in np.linspace(0.0, 1.0, 6):
        det = np.linalg.det(melnikov_jacobian_fd(canonical, h))
        assert abs(det) >= 0.1 * 2.0 * np.pi**2


# ---------------------------------------------------------------------
# The small-cycle branch.
# ---------------------------------------------------------------------


def test_branch_point_at_r2_zero_is_exact(canonical):
    bp = solve_small_branch(canonical, 0.7, 0.0)
    assert (bp.y2_bar, bp.mu2_bar, bp.residual) == (0.0, 0.0, 0.0)
    assert bp.mu == 0.0


def test_branch_point_kills_both_displacements(canonical, branch_point):
    bp = branch_point
    assert bp.residual <= 1e-9
    res = solve_invariant_series(canonical, 0.05, bp.mu2_bar, nu=0.2, N=30,
                                 mu2_max=0.25)
    val = melnikov(canonical, res, 0.5, bp.y2_bar, 0.05, bp.mu2_bar)
    assert abs(val.d1_hat) <= 1e-9
    assert abs(val.d2) <= 1e-9


def test_branch_point_matches_direct_shooting(canonical, generic, branch_point):
    cases = [(canonical, branch_point)]
    cases.append((generic, solve_small_branch(generic, 0.5, 0.05)))
    for system, bp in cases:
        res = solve_invariant_series(system, 0.05, bp.mu2_bar, nu=0.2, N=30,
                                     mu2_max=0.25)
        y2s, mu2s = return_map_fixed_point(system, res, 0.5, 0.05)
        assert y2s == pytest.approx(bp.y2_bar, abs=1e-6)
        assert mu2s == pytest.approx(bp.mu2_bar, abs=1e-6)


def test_branch_grid_agreement_of_both_solvers(canonical):
    for h in (0.25, 0.5, 0.75):
        for r2 in (0.01, 0.03, 0.05):
            bp = solve_small_branch(canonical, h, r2)
            res = solve_invariant_series(canonical, r2, bp.mu2_bar, nu=0.2,
                                         N=30, mu2_max=0.25)
            y2s, mu2s = return_map_fixed_point(canonical, res, h, r2)
            assert abs(y2s - bp.y2_bar) <= 1e-5
            assert abs(mu2s - bp.mu2_bar) <= 1e-5


def test_branch_scales_linearly_in_r2(canonical):
    ratios = []
    for r2 in (0.01, 0.02, 0.04):
        bp = solve_small_branch(canonical, 0.5, r2)
        ratios.append((bp.y2_bar / r2, bp.mu2_bar / r2))
    for i in (0, 1):
        vals = [r[i] for r in ratios]
        assert max(vals) - min(vals) <= 0.05 * abs(vals[0])


def test_branch_input_validation(canonical):
    with pytest.raises(ValueError, match="nonnegative"):
        solve_small_branch(canonical, -0.2, 0.05)
    with pytest.raises(ValueError, match="nonnegative"):
        solve_small_branch(canonical, 0.5, -0.01)


# ---------------------------------------------------------------------
# The Hopf curve, two routes.
# ---------------------------------------------------------------------


@pytest.mark.parametrize("r2", [0.05, 0.1])
def test_hopf_curve_two_routes_agree(canonical, generic, r2):
    for system in (canonical, generic):
        mu_m = hopf_mu(system, r2)
        mu_e = hopf_mu_eigenvalue(system, r2)
        assert mu_m == pytest.approx(mu_e, abs=1e-6)


def test_hopf_curve_vanishes_with_r2(canonical):
    values = [abs(hopf_mu(canonical, r2)) for r2 in (0.05, 0.02, 0.01)]
    assert values[0] > values[1] > values[2]
    for r2, v in zip((0.05, 0.02, 0.01), values):
        assert v <= 1.5 * r2**2


def test_hopf_rejects_nonpositive_r2(canonical):
    with pytest.raises(ValueError, match="positive"):
        hopf_mu(canonical, 0.0)


def test_canonical_equilibrium_spectrum(canonical):
    r2 = 0.05
    eq = chart2_equilibrium(canonical, r2, 0.0)
    assert np.abs(eq).max() == 0.0
    eigs = np.linalg.eigvals(chart2_field(canonical, r2, 0.0).jacobian(eq))
    char = np.poly(eigs)
    assert np.allclose(char.real, [1.0, 0.0, 1.0, -r2], atol=1e-10)
    assert np.abs(char.imag).max() <= 1e-12


def test_eigenvalue_structure_at_hopf(canonical, generic):
    r2 = 0.05
    for system in (canonical, generic):
        mu_h = hopf_mu_eigenvalue(system, r2)
        eq = chart2_equilibrium(system, r2, mu_h)
        eigs = np.linalg.eigvals(
            chart2_field(system, r2, mu_h).jacobian(eq)
        )
        pair = eigs[np.abs(eigs.imag) > 1e-8]
        real = eigs[np.abs(eigs.imag) <= 1e-8].real
        assert pair.shape == (2,)
        assert np.abs(pair.real).max() <= 1e-10
        assert abs(abs(pair.imag[0]) - 1.0) <= r2
        assert abs(real[0] - r2 * system.lam) <= r2**2


# ---------------------------------------------------------------------
# Branch export.
# ---------------------------------------------------------------------


def test_branch_csv_roundtrip(canonical, branch_point, tmp_path):
    points = [
        solve_small_branch(canonical, 0.0, 0.05),
        solve_small_branch(canonical, 0.25, 0.05),
        branch_point,
    ]
    path = tmp_path / "branch.csv"
    write_branch_csv(points, path)
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert [len(rows), list(rows[0])] == [
        3, ["h", "r2", "y2_bar", "mu2_bar", "mu", "residual"]
    ]
    for row, p in zip(rows, points):
        assert float(row["h"]) == p.h
        assert float(row["mu2_bar"]) == p.mu2_bar
        assert float(row["mu"]) == p.mu == p.r2 * p.mu2_bar
    assert isinstance(points[0], SmallBranchPoint)
