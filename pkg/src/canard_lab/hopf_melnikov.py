"""Small periodic orbits near the singular Hopf point.

With the parameter scaling mu = r2 * mu2, the scaling-chart flow near
the fold has a family of small cycles surrounding the slow manifold.
They are constructed here in three steps.

Straightening: subtract the slow-manifold graph, u = (x2, z2) - m(y2),
so that u = 0 is invariant and the planar part at r2 = y2 = 0 is the
layer problem, whose orbits phi_h through (-h, 0) are periodic.

Melnikov displacements: integrate the amplitude-scaled system u = h * w
from w(0) = (-1, 0) to its first return to the section {w2 = 0, w1 < 0}
and record

    d1_hat = w1(T) + 1            (radial displacement / h)
    d2     = integral of q dt     (slow displacement / r2)

both smooth down to h = 0 because the scaled vector field is polynomial
in h.  The displacement derivatives at (h, 0, 0, 0) have closed forms:
d/dmu2 = (0, T0(h)/2) exactly, and the y2-derivative of d1_hat equals
the adjoint-weighted quadrature -2 int_0^T0 e^{int_t^T 2 z2h} (z2h/h)^2.
Alongside the trajectory we carry the layer orbit, the adjoint weight
and the integral of the adjoint pairing, so the fundamental identity
I_psi(T) = psi(T) . (w(T) - Phi(T)) of the adjoint representation can be
checked on every run.

Roots: a 2-D Newton iteration on (y2, mu2) -> (d1_hat, d2), with the
slow manifold recomputed at each mu2, yields the branch
(y2_bar, mu2_bar)(h, r2) of small cycles; its h = 0 endpoint scaled back
by r2 is the Hopf curve mu_H(r2), cross-validated against a direct
eigenvalue crossing of the scaling-chart equilibrium.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .blowup_charts import chart2_field, chart2_field_polys
from .layer_dynamics import layer_field, periodic_orbit
from .numerics import (
    PolyField,
    SectionSpec,
    SolverError,
    Tolerances,
    integrate,
    integrate_to_section,
    newton_solve,
)
from .polyops import Poly, ser_diff
from .slow_manifold import manifold_coeff_arrays, solve_invariant_series

__all__ = [
    "StraightenedState",
    "MelnikovValue",
    "SmallBranchPoint",
    "straightened_polys",
    "straightened_field",
    "adjoint_solution",
    "melnikov",
    "melnikov_jacobian_fd",
    "solve_small_branch",
    "return_map_fixed_point",
    "hopf_mu",
    "hopf_mu_eigenvalue",
    "chart2_equilibrium",
    "write_branch_csv",
]


@dataclass(frozen=True)
class StraightenedState:
    """Point in manifold-straightened coordinates: u = (x2, z2) - m(y2)."""

    u: np.ndarray
    y2: float

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))
        if self.u.shape != (2,):
            raise ValueError("u must be a 2-vector")


@dataclass(frozen=True)
class MelnikovValue:
    """Displacements of one return: d1 = h * d1_hat, d2 = slow drift / r2."""

    d1: float
    d2: float
    d1_hat: float
    transition_time: float


@dataclass(frozen=True)
class SmallBranchPoint:
    """Root of (d1_hat, d2) at fixed (h, r2)."""

    h: float
    r2: float
    y2_bar: float
    mu2_bar: float
    residual: float

    @property
    def mu(self):
        """Ambient parameter mu = r2 * mu2_bar."""
        return self.r2 * self.mu2_bar


def _scaled_mu_polys(system, mu2):
    """Chart-2 field over (x2, y2, z2, r2) with mu folded to r2*mu2."""
    out = []
    for p in chart2_field_polys(system):
        out.append(Poly(4, [
            ((i, j, k, l + m), c * mu2**m)
            for (i, j, k, l, m), c in p.terms.items()
        ]))
    return out


def straightened_polys(system, res):
    """(du1, du2, q) as polynomials in (u1, u2, y2) at res's (r2, mu2).

    du = F_u(m + u, y2) - m'(y2) * r2 * q(m + u, y2) and dy2 = r2 * q.
    The slow factor q is obtained by exact division of the y2-equation
    by r2 (every monomial carries it after the mu = r2*mu2 fold), so the
    construction is regular at r2 = 0.
    """
    r2, mu2 = res.r2, res.mu2
    fx4, fy4, fz4 = _scaled_mu_polys(system, mu2)
    q3 = fy4.divide_by_var(3).subs_num(3, r2).restrict((0, 1, 2))
    fx3 = fx4.subs_num(3, r2).restrict((0, 1, 2))
    fz3 = fz4.subs_num(3, r2).restrict((0, 1, 2))

    rows = manifold_coeff_arrays(res)
    m_polys = [
        Poly(3, [((0, 0, n), c) for n, c in enumerate(row) if c != 0.0])
        for row in rows
    ]
    md_polys = [
        Poly(3, [((0, 0, n), c) for n, c in enumerate(ser_diff(row)) if c != 0.0])
        for row in rows
    ]
    targets = [
        m_polys[0] + Poly.var(0, 3),
        Poly.var(2, 3),
        m_polys[1] + Poly.var(1, 3),
    ]
    q_str = q3.compose(targets)
    du1 = fx3.compose(targets) - md_polys[0] * (q_str * r2)
    du2 = fz3.compose(targets) - md_polys[1] * (q_str * r2)
    return du1, du2, q_str


def straightened_field(system, res, state, r2, mu2):
    """Velocity (du1, du2, dy2) at a straightened state."""
    if r2 != res.r2 or mu2 != res.mu2:
        raise ValueError(
            f"manifold was computed at (r2={res.r2}, mu2={res.mu2}), "
            f"got (r2={r2}, mu2={mu2})"
        )
    if abs(state.y2 + res.offset) > res.nu + 1e-12:
        raise ValueError(
            f"y2={state.y2} is outside the manifold validity region"
        )
    du1, du2, q_str = straightened_polys(system, res)
    point = (state.u[0], state.u[1], state.y2)
    return np.array([du1(point), du2(point), r2 * q_str(point)])


# ---------------------------------------------------------------------
# The adjoint solution of the layer problem.
# ---------------------------------------------------------------------


def _layer_orbit_augmented(h, t_end, tol=None):
    """Layer orbit (x, z) from (-h, 0) with the running integral of 2z."""
    base = layer_field(0.0).polys
    polys = [p.embed(3, (0, 1)) for p in base]
    polys.append(Poly(3, {(0, 1, 0): 2.0}))
    fld = PolyField(polys)
    return integrate(fld, np.array([-h, 0.0, 0.0]), (0.0, t_end), tol=tol)


def adjoint_solution(h, t, T=None):
    """Adjoint solution psi_h(t) of the layer linearization, psi_h(T)=(1,0).

    Closed form along the layer orbit:
        psi_h(t) = -h^{-1} e^{int_t^T 2 z2h ds} (z2h'(t), -x2h'(t)).
    Accepts scalar or array t in [0, T]; T defaults to the orbit period.
    """
    if h <= 0.0:
        raise ValueError("h must be positive")
    if T is None:
        T = periodic_orbit(h).period
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < -1e-12) or np.any(t_arr > T + 1e-12):
        raise ValueError("t must lie in [0, T]")
    traj = _layer_orbit_augmented(h, T)
    states = np.atleast_2d(traj.sol(t_arr))
    i_end = traj.end[2]
    x, z, integ = states[:, 0], states[:, 1], states[:, 2]
    weight = np.exp(i_end - integ) / h
    psi = np.stack([-(x + z**2) * weight, -z * weight], axis=-1)
    if np.asarray(t).ndim == 0:
        return psi[0]
    return psi


# ---------------------------------------------------------------------
# Melnikov displacements on the amplitude-scaled system.
# ---------------------------------------------------------------------


_W_SECTION = SectionSpec(index=1, value=0.0, direction=-1,
                         guard_index=0, guard_sign=-1.0, guard_value=0.0)


def _purified_w_polys(system, res, h):
    """(dw1, dw2, q) over (w1, w2, y2) for the scaling u = h * w.

    The substitution u -> h*w is done symbolically in (w1, w2, y2, h);
    the u-independent part (the numerical invariance defect of the
    manifold) is removed before the exact division by h, so w = 0 is
    exactly invariant and h = 0 is a regular value.
    """
    du1, du2, q_str = straightened_polys(system, res)
    hw = [Poly.monomial(1.0, (1, 0, 0, 1)), Poly.monomial(1.0, (0, 1, 0, 1))]
    y4 = Poly.var(2, 4)
    out = []
    for p in (du1, du2):
        comp = p.compose([hw[0], hw[1], y4])
        moving = Poly(4, [
            (e, c) for e, c in comp.terms.items() if e[0] + e[1] > 0
        ])
        out.append(
            moving.divide_by_var(3).subs_num(3, h).restrict((0, 1, 2))
        )
    q_w = q_str.compose([hw[0], hw[1], y4]).subs_num(3, h).restrict((0, 1, 2))
    return out[0], out[1], q_w


def melnikov_field(system, res, h):
    """Augmented 8-state polynomial field for one Melnikov evaluation.

    State: (w1, w2, y2, Phi1, Phi2, E, Ipsi, I2) where Phi is the layer
    orbit scaled by h, E the adjoint exponential weight, Ipsi the
    accumulated adjoint pairing and I2 the slow displacement integral.
    """
    dw1_3, dw2_3, q_3 = _purified_w_polys(system, res, h)
    dw1 = dw1_3.embed(8, (0, 1, 2))
    dw2 = dw2_3.embed(8, (0, 1, 2))
    q8 = q_3.embed(8, (0, 1, 2))
    w1, w2 = Poly.var(0, 8), Poly.var(1, 8)
    p1, p2, e_w = Poly.var(3, 8), Poly.var(4, 8), Poly.var(5, 8)
    f_phi1 = p2 * (-1.0)
    f_phi2 = p1 + p2 * p2 * h
    f_e = e_w * p2 * (-2.0 * h)
    psi1 = f_phi2 * e_w * (-1.0)
    psi2 = p2 * e_w * (-1.0)
    c1 = dw1 + w2
    c2 = dw2 - w1 - p2 * w2 * (2.0 * h) + p2 * p2 * h
    f_ipsi = psi1 * c1 + psi2 * c2
    return PolyField([
        dw1, dw2, q8 * res.r2, f_phi1, f_phi2, f_e, f_ipsi, q8,
    ])


def melnikov(system, res, h, y2, r2, mu2, tol=None, t_max=50.0,
             full_output=False):
    """Displacements of the first return from (u, y2) = ((-h, 0), y2).

    Valid for h >= 0; at h = 0 the scaled system is the analytic
    extension and the displacements are the limiting Melnikov values.
    """
    if h < 0.0:
        raise ValueError("h must be nonnegative")
    if r2 != res.r2 or mu2 != res.mu2:
        raise ValueError(
            f"manifold was computed at (r2={res.r2}, mu2={res.mu2}), "
            f"got (r2={r2}, mu2={mu2})"
        )
    fld = melnikov_field(system, res, h)
    y0 = np.array([-1.0, 0.0, y2, -1.0, 0.0, 1.0, 0.0, 0.0])
    traj = integrate_to_section(fld, y0, _W_SECTION, t_max, tol=tol)
    end = traj.end
    t_end = traj.t_end
    value = MelnikovValue(
        d1=h * (end[0] + 1.0),
        d2=float(end[7]),
        d1_hat=float(end[0] + 1.0),
        transition_time=t_end,
    )
    if full_output:
        return value, traj
    return value


def melnikov_jacobian_fd(system, h, step=1e-5, tol=None):
    """Central-difference Jacobian of (d1_hat, d2) in (y2, mu2) at r2=0.

    Columns are the displacement derivatives at (h, 0, 0, 0); the slow
    manifold (the critical curve at r2 = 0) is recomputed for each mu2
    sample.
    """
    def at(y2, mu2):
        res = solve_invariant_series(system, 0.0, mu2, nu=0.2, N=8)
        val = melnikov(system, res, h, y2, 0.0, mu2, tol=tol)
        return np.array([val.d1_hat, val.d2])

    col_y2 = (at(step, 0.0) - at(-step, 0.0)) / (2.0 * step)
    col_mu2 = (at(0.0, step) - at(0.0, -step)) / (2.0 * step)
    return np.stack([col_y2, col_mu2], axis=1)


# ---------------------------------------------------------------------
# The small-cycle branch and the Hopf curve.
# ---------------------------------------------------------------------


def solve_small_branch(system, h, r2, nu=0.2, N=30, newton_tol=1e-10,
                       fd_step=1e-6, tol=None, mu2_max=0.25):
    """Newton root of (y2, mu2) -> (d1_hat, d2) at fixed (h, r2).

    Seeded at (0, 0); the manifold is recomputed at every mu2 iterate,
    with the mu2 smallness bound widened to mu2_max so Newton steps may
    overshoot the root without tripping the precondition.  At r2 = 0 the
    displacements vanish identically at (0, 0).  Beyond h = 1 the cycle
    swings far enough from the equilibrium that the return map's Newton
    basin thins out, so the seed is transported along an amplitude
    ladder by polynomial extrapolation of the solved branch.
    """
    if h < 0.0:
        raise ValueError("h must be nonnegative")
    if r2 < 0.0:
        raise ValueError("r2 must be nonnegative")
    if r2 == 0.0:
        return SmallBranchPoint(h=h, r2=0.0, y2_bar=0.0, mu2_bar=0.0,
                                residual=0.0)

    def solve_at(h_val, seed):
        def displacements(x):
            y2, mu2 = x
            res = solve_invariant_series(system, r2, mu2, nu=nu, N=N,
                                         r2_max=max(0.1, r2),
                                         mu2_max=mu2_max)
            val = melnikov(system, res, h_val, y2, r2, mu2, tol=tol)
            return np.array([val.d1_hat, val.d2])

        tols = (tol or Tolerances()).with_(newton_tol=newton_tol)
        return newton_solve(displacements, seed, tol=tols, fd_step=fd_step)

    ladder = list(np.arange(1.0, h, 0.5)) + [h]
    solved = []
    x, info = np.zeros(2), None
    for rung in ladder:
        if len(solved) >= 2:
            hs = [s[0] for s in solved[-3:]]
            deg = len(hs) - 1
            x = np.array([
                np.polyval(np.polyfit(hs, [s[k + 1] for s in solved[-3:]],
                                      deg), rung)
                for k in range(2)
            ])
        x, info = solve_at(rung, x)
        solved.append((rung, float(x[0]), float(x[1])))
    return SmallBranchPoint(h=h, r2=r2, y2_bar=float(x[0]),
                            mu2_bar=float(x[1]), residual=info["residual"])


def return_map_fixed_point(system, res, h, r2, newton_tol=1e-10,
                           fd_step=1e-6, tol=None, t_max=50.0, mu2_max=0.25):
    """Independent root finder: direct shooting of the unscaled return map.

    Integrates the straightened system from (u, y2) = ((-h, 0), y2) to
    the first return to {u2 = 0, u1 < 0} and Newton-solves the two
    mismatches (u1(T) + h, y2(T) - y2) over (y2, mu2).  No Melnikov
    machinery is shared beyond the manifold construction.
    """
    if r2 == 0.0:
        return 0.0, 0.0
    section = SectionSpec(index=1, value=0.0, direction=-1,
                          guard_index=0, guard_sign=-1.0, guard_value=0.0)

    def mismatches(x):
        y2, mu2 = x
        res_mu = solve_invariant_series(system, r2, mu2, nu=res.nu,
                                        N=res.order,
                                        r2_max=max(0.1, r2),
                                        mu2_max=mu2_max)
        polys = straightened_polys(system, res_mu)
        fld = PolyField([polys[0], polys[1], polys[2] * r2])
        traj = integrate_to_section(
            fld, np.array([-h, 0.0, y2]), section, t_max, tol=tol
        )
        return np.array([traj.end[0] + h, traj.end[2] - y2])

    tols = (tol or Tolerances()).with_(newton_tol=newton_tol)
    x, _ = newton_solve(mismatches, np.zeros(2), tol=tols, fd_step=fd_step)
    return float(x[0]), float(x[1])


def hopf_mu(system, r2, **kwargs):
    """Hopf curve mu_H(r2) = r2 * mu2_bar(h=0, r2)."""
    if r2 <= 0.0:
        raise ValueError("r2 must be positive")
    return r2 * solve_small_branch(system, 0.0, r2, **kwargs).mu2_bar


def chart2_equilibrium(system, r2, mu, seed=None, tol=None):
    """Equilibrium of the scaling-chart field near the origin."""
    fld = chart2_field(system, r2, mu)
    if seed is None:
        seed = np.zeros(3)
    point, _ = newton_solve(fld, seed, tol=tol)
    return point


def hopf_mu_eigenvalue(system, r2, bracket=None, tol=None):
    """Hopf location by the imaginary-axis crossing of the complex pair.

    Independent of the Melnikov construction: tracks the equilibrium of
    the scaling-chart field in mu and solves Re(pair)(mu) = 0 by Brent's
    method, widening the initial bracket [-r2/2, r2/2] if needed.
    """
    from scipy.optimize import brentq

    def re_pair(mu):
        point = chart2_equilibrium(system, r2, mu, tol=tol)
        eigs = np.linalg.eigvals(chart2_field(system, r2, mu).jacobian(point))
        complex_eigs = eigs[np.abs(eigs.imag) > 1e-8]
        if complex_eigs.size != 2:
            raise SolverError(
                f"expected one complex pair at mu={mu}, got {eigs}"
            )
        return float(complex_eigs.real.max())

    if bracket is None:
        half = 0.5 * r2
        bracket = (-half, half)
    lo, hi = bracket
    f_lo, f_hi = re_pair(lo), re_pair(hi)
    for _ in range(8):
        if f_lo * f_hi <= 0.0:
            break
        lo, hi = 2.0 * lo, 2.0 * hi
        f_lo, f_hi = re_pair(lo), re_pair(hi)
    else:
        raise SolverError(f"no sign change of Re(pair) in [{lo}, {hi}]")
    return float(brentq(re_pair, lo, hi, xtol=1e-14, rtol=1e-15))


def write_branch_csv(points, path):
    """CSV export: one row per branch point, 16-digit scientific notation."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["h", "r2", "y2_bar", "mu2_bar", "mu", "residual"])
        for p in points:
            writer.writerow([
                "%.16e" % v
                for v in (p.h, p.r2, p.y2_bar, p.mu2_bar, p.mu, p.residual)
            ])
