"""Corner passage along the attracting/repelling slow manifolds in chart 1.

After blowup, the slow manifolds of the fold appear in the entry chart as
center manifolds of the lines of partially hyperbolic equilibria at
``z1 = -1`` (attracting) and ``z1 = +1`` (repelling).  This module provides
the pieces needed to control the passage of orbits along those manifolds
from the fold section into the rescaling regime:

* ``center_manifold_graph`` computes the graph ``z1 = m(eps1, r1, y1)`` of
  either manifold as a polynomial jet, by matching the invariance equation
  degree by degree around the base point.

* ``shilnikov_solve`` solves the two-point boundary value problem for the
  slow variable along the passage: the radial and gain variables have
  closed-form profiles ``r1(t) = exp(-t/2) r10`` and
  ``eps1(t) = exp(t - tau) eps11``, and the slow component is written as

      y(t) = exp(lam (t - tau)) * E(t) * (y11 + u(t)),      u(tau) = 0,

  where ``E(t)`` is the explicit exponential of the integrated linear
  correction and the bounded correction ``u`` is produced by Picard
  iteration of the integral operator obtained from variation of constants.
  The boundary values are met exactly by construction.

* ``phi_infinity`` evaluates the closed-form limit of the boundary
  correction as the passage time grows, used to check the advertised
  exponential convergence rate.

* ``transition_map_check`` integrates the actual chart-1 vector field from
  the fold section to the exit section ``{eps1 = eps11}`` and splits the
  arriving slow coordinate into the predicted power-law leading term and a
  remainder, together with the exact radial bookkeeping and the collapse
  of the fast coordinate onto the manifold graph.

The passage exponent is ``lambda_mu(mu) = (1 - mu) / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as npcheb

from .blowup_charts import chart1_field, chart1_field_polys
from .numerics import (
    SectionSpec,
    ConvergenceError,
    PolyField,
    SolverError,
    Tolerances,
    integrate_to_section,
)
from .polyops import Poly

__all__ = [
    "CenterManifoldGraph",
    "ShilnikovBC",
    "ShilnikovSolution",
    "TransitionCheck",
    "center_manifold_graph",
    "graph_invariance_defect",
    "lambda_mu",
    "phi_infinity",
    "shilnikov_solve",
    "shilnikov_to_json_dict",
    "transition_map_check",
]

#: Default exit value of the gain variable for transition checks.
EPS11_DEFAULT = 0.25

#: Default width parameter of the entry validity region.
CHI_DEFAULT = 0.1

#: Minimum passage time accepted by :func:`shilnikov_solve`.
TAU_MIN = 5.0


def lambda_mu(mu):
    """Passage exponent of the slow variable, ``(1 - mu) / 2``."""
    return 0.5 * (1.0 - float(mu))


# ---------------------------------------------------------------------------
# center manifold graphs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CenterManifoldGraph:
    """Polynomial graph ``z1 = m(eps1, r1, y1)`` of a chart-1 slow manifold.

    ``poly`` collects the correction terms on top of the constant ``base``
    (``-1`` for the attracting side, ``+1`` for the repelling side); by
    construction it contains no monomials in ``y1`` alone, so
    ``m(0, 0, y1) == base`` holds exactly.
    """

    side: str
    mu: float
    degree: int
    poly: Poly
    base: float

    def eval(self, eps1, r1, y1):
        """Evaluate the graph at scalar or array arguments."""
        eps1, r1, y1 = np.broadcast_arrays(
            np.asarray(eps1, dtype=float),
            np.asarray(r1, dtype=float),
            np.asarray(y1, dtype=float),
        )
        pts = np.stack([eps1.ravel(), r1.ravel(), y1.ravel()], axis=1)
        vals = self.poly.eval_many(pts).reshape(eps1.shape)
        if vals.ndim == 0:
            return float(vals)
        return vals


def _chart1_numeric_polys(system, mu):
    """Chart-1 field with the parameter substituted, over (eps1, r1, y1, z1)."""
    return [
        p.subs_num(4, mu).restrict((0, 1, 2, 3)) for p in chart1_field_polys(system)
    ]


def _graph_defect_poly(polys, m):
    """Invariance defect of the candidate graph ``m`` as a 3-variable Poly."""
    targets = [Poly.var(i, 3) for i in range(3)] + [m]
    fe, fr, fy, fz = [p.compose(targets) for p in polys]
    return fz - (m.deriv(0) * fe + m.deriv(1) * fr + m.deriv(2) * fy)


def _degree_coeffs(poly, basis):
    """Coefficients of ``poly`` on the listed monomials."""
    return np.array([poly.terms.get(expt, 0.0) for expt in basis])


def center_manifold_graph(system, side, mu, degree=6):
    """Compute the chart-1 slow manifold graph by degree-by-degree matching.

    The invariance equation for ``z1 = m(eps1, r1, y1)`` is expanded around
    the base point ``(0, 0, y1, base)``; at each total degree the defect is
    linear in the unknown coefficients and the matching system is solved
    directly.  The line of equilibria ``{eps1 = r1 = 0, z1 = base}`` lies in
    the manifold, so monomials in ``y1`` alone never acquire a coefficient
    and ``m(0, 0, y1) == base`` exactly.

    Raises :class:`SolverError` if a matching system is singular, reporting
    the degree and the monomial carried by the null direction.
    """
    if side not in ("attracting", "repelling"):
        raise ValueError("side must be 'attracting' or 'repelling'")
    degree = int(degree)
    if degree < 2:
        raise ValueError("degree must be at least 2")
    base = -1.0 if side == "attracting" else 1.0
    polys = _chart1_numeric_polys(system, float(mu))
    m = Poly.const(base, 3)
    for d in range(1, degree + 1):
        basis = [
            (i, j, d - i - j)
            for i in range(d + 1)
            for j in range(d + 1 - i)
            if i + j > 0
        ]
        defect = _graph_defect_poly(polys, m)
        stray = abs(defect.terms.get((0, 0, d), 0.0))
        if stray > 1e-10:
            raise SolverError(
                f"defect at degree {d} has a pure-y1 component ({stray:.3e}); "
                "the equilibrium line is not being preserved"
            )
        rhs = -_degree_coeffs(defect, basis)
        targets = [Poly.var(i, 3) for i in range(3)] + [m]
        composed = [p.compose(targets) for p in polys]
        dcomposed = [p.deriv(3).compose(targets) for p in polys]
        transport = (
            m.deriv(0) * dcomposed[0]
            + m.deriv(1) * dcomposed[1]
            + m.deriv(2) * dcomposed[2]
        )
        cols = []
        for expt in basis:
            phi = Poly.monomial(1.0, expt)
            col = (
                dcomposed[3] * phi
                - phi.deriv(0) * composed[0]
                - phi.deriv(1) * composed[1]
                - phi.deriv(2) * composed[2]
                - transport * phi
            )
            cols.append(_degree_coeffs(col, basis))
        mat = np.stack(cols, axis=1)
        s = np.linalg.svd(mat, compute_uv=False)
        if s[-1] < 1e-10 * max(s[0], 1.0):
            _, _, vt = np.linalg.svd(mat)
            offending = basis[int(np.argmax(np.abs(vt[-1])))]
            raise SolverError(
                f"singular matching system at degree {d} "
                f"(resonance near monomial eps1^{offending[0]} "
                f"r1^{offending[1]} y1^{offending[2]})"
            )
        coeffs = np.linalg.solve(mat, rhs)
        for expt, c in zip(basis, coeffs):
            m = m + Poly.monomial(float(c), expt)
    return CenterManifoldGraph(side=side, mu=float(mu), degree=degree, poly=m, base=base)


def graph_invariance_defect(system, graph, points):
    """Largest pointwise invariance defect of a manifold graph.

    ``points`` is an ``(n, 3)`` array of ``(eps1, r1, y1)`` samples; the
    defect is ``|dz1/dt - grad(m) . (deps1/dt, dr1/dt, dy1/dt)|`` evaluated
    on the graph.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[None, :]
    polys = _chart1_numeric_polys(system, graph.mu)
    zvals = graph.eval(points[:, 0], points[:, 1], points[:, 2])
    full = np.column_stack([points, np.atleast_1d(zvals)])
    fe, fr, fy, fz = [p.eval_many(full) for p in polys]
    grads = [graph.poly.deriv(i).eval_many(points) for i in range(3)]
    defect = fz - (grads[0] * fe + grads[1] * fr + grads[2] * fy)
    return float(np.max(np.abs(defect)))


# ---------------------------------------------------------------------------
# passage boundary value problem
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShilnikovBC:
    """Boundary data for the passage problem.

    The gain variable is prescribed at exit (``eps1(tau) = eps11``), the
    radius at entry (``r1(0) = r10``), and the slow variable at exit
    (``y(tau) = y11``).
    """

    tau: float
    eps11: float
    r10: float
    y11: float
    mu: float

    def __post_init__(self):
        if not self.tau > 0.0:
            raise ValueError("tau must be positive")
        if not self.eps11 > 0.0:
            raise ValueError("eps11 must be positive")
        if self.r10 < 0.0:
            raise ValueError("r10 must be nonnegative")


def _zero_coeff_terms(l0, mu):
    """Terms of ``L0(r1, 0, mu)`` as (r1 power, numeric coefficient) pairs.

    The parameter is folded in, so each entry contributes
    ``c * r10**(k+1) * exp(-(k+1) t / 2)`` to the integrand ``r1 L0``.
    """
    folded = {}
    for expt, coeff in l0.terms.items():
        k, ypow, mpow = expt
        if ypow:
            continue
        folded[k] = folded.get(k, 0.0) + coeff * mu**mpow
    return sorted(folded.items())


def _exponent_integral(terms, r10, tau, ts):
    """Closed form of ``int_tau^t r1(s) L0(r1(s), 0, mu) ds`` on a grid."""
    ts = np.asarray(ts, dtype=float)
    out = np.zeros_like(ts)
    for k, c in terms:
        p = k + 1
        out += c * r10**p * (2.0 / p) * (math.exp(-p * tau / 2.0) - np.exp(-p * ts / 2.0))
    return out


@dataclass
class ShilnikovSolution:
    """Solution of the passage boundary value problem.

    ``ts`` are Chebyshev nodes on ``[0, tau]``; ``u``/``phi`` hold the node
    values of the bounded correction and of the assembled boundary-layer
    term ``phi = (E - 1) y11 + E u``.  ``distances`` is the weighted
    iteration history ``exp(alpha tau) * sup |u_next - u|``.
    """

    bc: ShilnikovBC
    alpha: float
    lam: float
    n_nodes: int
    ts: np.ndarray
    u: np.ndarray
    phi: np.ndarray
    distances: list
    iterations: int
    _u_cheb: np.ndarray = field(repr=False)
    _l0_terms: list = field(repr=False)

    @property
    def contraction_ratios(self):
        d = self.distances
        return [d[i + 1] / d[i] for i in range(len(d) - 1) if d[i] > 0.0]

    def e_factor(self, t):
        """The explicit exponential ``E(t)`` of the integrated correction."""
        vals = _exponent_integral(self._l0_terms, self.bc.r10, self.bc.tau, t)
        return np.exp(vals)

    def u_at(self, t):
        x = 2.0 * np.asarray(t, dtype=float) / self.bc.tau - 1.0
        return npcheb.chebval(x, self._u_cheb)

    def phi_at(self, t):
        e = self.e_factor(t)
        return (e - 1.0) * self.bc.y11 + e * self.u_at(t)

    def y_at(self, t):
        """Slow variable along the passage (boundary values exact)."""
        t = np.asarray(t, dtype=float)
        return np.exp(self.lam * (t - self.bc.tau)) * self.e_factor(t) * (
            self.bc.y11 + self.u_at(t)
        )


def shilnikov_solve(
    l0,
    l1,
    bc,
    alpha=0.25,
    delta=0.1,
    tol=1e-12,
    tau_min=TAU_MIN,
    max_iter=80,
    n_nodes=None,
):
    """Solve the passage problem by Picard iteration on a Chebyshev grid.

    ``l0`` is the quadratic-correction polynomial in ``(r1, y, mu)`` and
    ``l1`` the forcing polynomial in ``(eps1, r1, y, mu)`` of the reduced
    slow equation ``y' = (lam + r1 L0) y + r1 eps1 L1``.  The radial and
    gain profiles are explicit exponentials, and the correction ``u`` in

        y(t) = exp(lam (t - tau)) E(t) (y11 + u(t))

    is the fixed point of the variation-of-constants integral operator,
    iterated from ``u = 0`` until the weighted update
    ``exp(alpha tau) sup |u_next - u|`` drops below ``tol``.  Integrals are
    evaluated through the degree ``n-1`` Chebyshev interpolant of the
    integrand, so ``u(tau) = 0`` holds exactly at every iterate.

    Raises :class:`ValueError` for boundary data outside the smallness box,
    :class:`SolverError` when the iteration stops contracting, when an
    iterate leaves the radius-``delta`` ball, or when the Chebyshev
    coefficients fail to decay (under-resolved grid), and
    :class:`ConvergenceError` when ``max_iter`` is exhausted.
    """
    if not isinstance(l0, Poly) or l0.nvars != 3:
        raise ValueError("l0 must be a Poly in (r1, y, mu)")
    if not isinstance(l1, Poly) or l1.nvars != 4:
        raise ValueError("l1 must be a Poly in (eps1, r1, y, mu)")
    if not 0.0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 1/2)")
    if not bc.tau > tau_min:
        raise ValueError(f"tau must exceed {tau_min} for the passage estimates")
    if bc.eps11 > 0.5 or bc.r10 > 0.15 or abs(bc.y11) > 0.15 or abs(bc.mu) > 0.5:
        raise ValueError(
            "boundary data outside the smallness box "
            "(eps11 <= 0.5, r10 <= 0.15, |y11| <= 0.15, |mu| <= 0.5)"
        )
    lam = lambda_mu(bc.mu)
    tau = float(bc.tau)
    n = int(n_nodes) if n_nodes is not None else 32 + int(8 * tau)
    xs = -np.cos(np.linspace(0.0, math.pi, n))
    ts = (xs + 1.0) * (tau / 2.0)
    r1s = bc.r10 * np.exp(-ts / 2.0)
    eps1s = bc.eps11 * np.exp(ts - tau)
    l0_terms = _zero_coeff_terms(l0, bc.mu)
    es = np.exp(_exponent_integral(l0_terms, bc.r10, tau, ts))
    gs = np.exp(lam * (ts - tau)) * es
    l0_zero = Poly(3, {(k, 0, 0): c for k, c in l0_terms})
    l0_bar = (l0.subs_num(2, bc.mu) - l0_zero).divide_by_var(1).restrict((0, 1))
    l1_num = l1.subs_num(3, bc.mu).restrict((0, 1, 2))

    weight = math.exp(alpha * tau)
    u = np.zeros(n)
    u_cheb = np.zeros(1)
    distances = []
    growing = 0
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        ys = gs * (bc.y11 + u)
        quad = l0_bar.eval_many(np.stack([r1s, ys], axis=1))
        forcing = l1_num.eval_many(np.stack([eps1s, r1s, ys], axis=1))
        integrand = r1s * gs * quad * (bc.y11 + u) ** 2 + (r1s * eps1s / gs) * forcing
        coeffs = npcheb.chebfit(xs, integrand, n - 1)
        anti = npcheb.chebint(coeffs) * (tau / 2.0)
        anti[0] -= npcheb.chebval(1.0, anti)
        u_next = npcheb.chebval(xs, anti)
        u_next[-1] = 0.0
        dist = weight * float(np.max(np.abs(u_next - u)))
        distances.append(dist)
        if weight * float(np.max(np.abs(u_next))) > delta:
            raise SolverError(
                "Picard iterate left the contraction ball "
                f"(delta={delta}); boundary data too large for this radius"
            )
        if len(distances) >= 2 and distances[-2] > 0.0:
            growing = growing + 1 if dist >= distances[-2] else 0
            if growing >= 3:
                tail = ", ".join(f"{d:.3e}" for d in distances[-4:])
                raise SolverError(
                    f"Picard iteration is not contracting (distances {tail})"
                )
        u = u_next
        u_cheb = anti
        if dist <= tol:
            converged = True
            break
    if not converged:
        raise ConvergenceError(
            f"passage iteration did not reach tol={tol} in {max_iter} steps "
            f"(last distance {distances[-1]:.3e})"
        )
    scale = float(np.max(np.abs(u_cheb))) if u_cheb.size else 0.0
    if scale > 0.0 and n >= 4:
        tail_sz = float(np.max(np.abs(u_cheb[-3:])))
        if tail_sz > 1e-8 * scale:
            raise SolverError(
                f"Chebyshev coefficients fail to decay (tail ratio "
                f"{tail_sz / scale:.3e} at n={n}); grid under-resolved"
            )
    phi = (es - 1.0) * bc.y11 + es * u
    return ShilnikovSolution(
        bc=bc,
        alpha=alpha,
        lam=lam,
        n_nodes=n,
        ts=ts,
        u=u,
        phi=phi,
        distances=distances,
        iterations=iterations,
        _u_cheb=u_cheb,
        _l0_terms=l0_terms,
    )


def shilnikov_to_json_dict(sol):
    """JSON-serializable diagnostic record of a passage solve."""
    return {
        "tau": sol.bc.tau,
        "eps11": sol.bc.eps11,
        "r10": sol.bc.r10,
        "y11": sol.bc.y11,
        "mu": sol.bc.mu,
        "alpha": sol.alpha,
        "lambda": sol.lam,
        "n_nodes": sol.n_nodes,
        "iterations": sol.iterations,
        "distances": list(map(float, sol.distances)),
        "u_entry": float(sol.u[0]),
        "phi_entry": float(sol.phi[0]),
        "y_entry": float(sol.y_at(0.0)),
    }


def phi_infinity(l0, t, eps11, r10, y11, mu):
    """Infinite-passage-time limit of the boundary correction.

    Closed form ``(exp(-I(t)) - 1) y11`` with
    ``I(t) = sum_k c_k(mu) r10^(k+1) (2/(k+1)) exp(-(k+1) t / 2)`` summed
    over the ``y``-free terms of ``l0``.  ``eps11`` is accepted for
    signature symmetry with the boundary data; the limit does not depend
    on it.
    """
    if not isinstance(l0, Poly) or l0.nvars != 3:
        raise ValueError("l0 must be a Poly in (r1, y, mu)")
    del eps11
    t = np.asarray(t, dtype=float)
    integral = np.zeros_like(t)
    for k, c in _zero_coeff_terms(l0, float(mu)):
        p = k + 1
        integral += c * float(r10) ** p * (2.0 / p) * np.exp(-p * t / 2.0)
    out = (np.exp(-integral) - 1.0) * float(y11)
    if out.ndim == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# transition map check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransitionCheck:
    """Decomposition of an integrated corner passage.

    ``leading`` is the power-law prediction ``(eps11/eps1)**lambda_mu(mu) *
    y_side`` and ``psi`` the measured remainder; ``z_gap`` is the distance
    of the arriving fast coordinate from the manifold graph, and the radial
    bookkeeping ``arrival_r1 == sqrt(eps1/eps11) * r1`` is checked against
    the integrated value.
    """

    leading: float
    psi: float
    arrival_r1: float
    expected_r1: float
    z_gap: float
    arrival: np.ndarray
    transition_time: float


def transition_map_check(
    system,
    side,
    eps1,
    r1,
    y_side,
    mu,
    eps11=EPS11_DEFAULT,
    chi=CHI_DEFAULT,
    graph_degree=6,
    tol=None,
    t_max=2000.0,
):
    """Integrate the chart-1 field across the corner and split the arrival.

    Starts on the fold section ``{z1 = 0}`` at ``(eps1, r1, y_side)`` and
    integrates to the exit section ``{eps1 = eps11}`` (forward in time for
    the attracting side, backward for the repelling side).  The arriving
    slow coordinate is decomposed as ``leading + psi`` with ``leading =
    (eps11/eps1)**lambda_mu(mu) * y_side``; the arriving radius must agree
    with ``sqrt(eps1/eps11) * r1``, which is conserved exactly by the flow.

    Raises :class:`ValueError` if the entry point is outside the validity
    region ``|y_side| <= chi * (eps1/eps11)**lambda_mu(mu)``, and
    :class:`SolverError` if the exit section is not reached or the orbit
    escapes the validity tube around the manifold.
    """
    if side not in ("attracting", "repelling"):
        raise ValueError("side must be 'attracting' or 'repelling'")
    eps1 = float(eps1)
    r1 = float(r1)
    y_side = float(y_side)
    if not 0.0 < eps1 < eps11:
        raise ValueError("eps1 must lie strictly between 0 and eps11")
    if r1 < 0.0:
        raise ValueError("r1 must be nonnegative")
    lam = lambda_mu(mu)
    bound = chi * (eps1 / eps11) ** lam
    if abs(y_side) > bound:
        raise ValueError(
            f"entry point outside the validity region (|y_side| <= {bound:.3e})"
        )
    fld = chart1_field(system, mu)
    if side == "repelling":
        fld = PolyField([p * (-1.0) for p in fld.polys])
    tols = tol if tol is not None else Tolerances()
    section = SectionSpec(index=0, value=eps11, direction=1)
    start = np.array([eps1, r1, y_side, 0.0])
    traj = integrate_to_section(fld, start, section, t_max=t_max, tol=tols)
    zsign = -1.0 if side == "attracting" else 1.0
    zs = traj.ys[:, 3] * zsign
    if np.max(np.abs(traj.ys[:, 2])) > 0.5 or np.min(zs) < -0.3 or np.max(zs) > 1.6:
        raise SolverError("orbit escaped the validity tube around the manifold")
    arrival = traj.end
    expected_r1 = math.sqrt(eps1 / eps11) * r1
    if abs(arrival[1] - expected_r1) > 1e-6:
        raise SolverError(
            "radial bookkeeping violated: arrival r1 "
            f"{arrival[1]:.12e} vs expected {expected_r1:.12e}"
        )
    graph = center_manifold_graph(system, side, mu, degree=graph_degree)
    z_gap = abs(arrival[3] - graph.eval(arrival[0], arrival[1], arrival[2]))
    leading = (eps11 / eps1) ** lam * y_side
    return TransitionCheck(
        leading=leading,
        psi=float(arrival[2] - leading),
        arrival_r1=float(arrival[1]),
        expected_r1=expected_r1,
        z_gap=float(z_gap),
        arrival=arrival,
        transition_time=float(traj.t_end),
    )
