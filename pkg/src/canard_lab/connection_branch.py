"""Canard cycles assembled from forward and backward corner passages.

A closed orbit is detected on the entry-chart section {z1 = 0}.  From a
section point (eps1, r1, y1, 0) the attracting leg runs forward and the
repelling leg backward; each crosses into the scaling chart at
{eps1 = eps11} and continues to its first intersection with {z2 = 0}
near the singular connection.  Because both legs start at the same
point, the orbit closes exactly when the two landings coincide, and the
landing mismatch as a function of (y1, mu) is a regular 2x2 root-finding
problem once the unknowns are rescaled by (eps1/eps11)^lambda.

The solved points form a branch in the amplitude h = r1 which is glued
to the small-cycle branch of `hopf_melnikov` at the chart seam
eps1 = eps11, and each reconstructed cycle can be compared against the
singular canard cycle (slow segment through the fold plus a fast fiber)
in Hausdorff distance.
"""

import json
from dataclasses import dataclass, replace

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .blowup_charts import (
    Chart1Point,
    Chart2Point,
    blow_down_chart1,
    blow_down_chart2,
    chart1_field,
    chart1_to_chart2,
    chart2_field,
)
from .hopf_melnikov import SmallBranchPoint, solve_small_branch
from .numerics import (
    PolyField,
    SectionSpec,
    SolverError,
    Tolerances,
    integrate_to_section,
    newton_solve,
)
from .shilnikov_transition import EPS11_DEFAULT, lambda_mu
from .slow_manifold import manifold_coeff_arrays, solve_invariant_series

__all__ = [
    "AmbientCycle",
    "BranchPoint",
    "CycleFamily",
    "SeparationValue",
    "ambient_reclosure",
    "branch_sweep",
    "hausdorff_to_singular",
    "mu0_predictor",
    "reconstruct_cycle",
    "separation",
    "singular_cycle",
    "solve_connection",
    "write_family_csv",
    "write_family_json",
]

# Validity box of the corner-connection solver.  The amplitude bound is
# looser than the passage-map box because the sweep runs the branch out
# to moderate h where the cycles are still far from relaxation size.
EPS10 = EPS11_DEFAULT
R1_MAX = 0.5
MU_MAX = 0.5

# Landing window around the singular connection's crossing of {z2 = 0},
# which sits at (x2, y2) = (1/2, 0).
SINGULAR_LANDING = np.array([0.5, 0.0])
WINDOW_DEFAULT = 0.75

SEAM_TOL = 1e-4


# ---------------------------------------------------------------------
# Separation values: one corner passage into the scaling chart.
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class SeparationValue:
    """Landing of one leg on {z2 = 0} plus the pieces that got it there."""

    side: str
    landing: np.ndarray
    r2: float
    boundary: Chart2Point
    leg_chart1: object
    leg_chart2: object
    eps1: float
    r1: float
    y1: float
    mu: float
    eps11: float


def _validate_side(side):
    if side not in ("a", "r"):
        raise ValueError(f"side must be 'a' or 'r', got {side!r}")


def separation(system, side, eps1, r1, y1, mu, *, eps11=EPS11_DEFAULT,
               window=WINDOW_DEFAULT, tol=None, t_max=None, t_max2=None):
    """Flow a section point into the scaling chart and onto {z2 = 0}.

    From (eps1, r1, y1, 0) on the entry section, the attracting leg
    (side 'a') runs forward and the repelling leg (side 'r') backward in
    time until {eps1 = eps11}; exact conservation of r1^2 eps1 fixes the
    radius there.  After the chart change the leg continues (in the same
    time direction) to its first crossing of {z2 = 0} and the projection
    (x2, y2) of the crossing is returned as `landing`.  The landing must
    fall within `window` of the singular crossing (1/2, 0).

    Well-aligned legs land within a handful of time units, but an orbit
    grazing the fold curve of the scaling chart drifts along it at speed
    proportional to r2 before it can escape, so the default chart-2 time
    budget grows like 1/r2.
    """
    _validate_side(side)
    eps1 = float(eps1)
    r1 = float(r1)
    y1 = float(y1)
    mu = float(mu)
    if not eps1 > 0.0:
        raise ValueError(f"eps1 must be positive, got {eps1}")
    if eps1 > eps11 * (1.0 + 1e-12):
        raise ValueError(
            f"eps1={eps1} lies beyond the seam eps11={eps11}: the corner "
            "passage starts on the entry-chart side of the seam"
        )
    if r1 < 0.0:
        raise ValueError(f"r1 must be nonnegative, got {r1}")
    if abs(mu) > MU_MAX:
        raise ValueError(f"|mu| must not exceed {MU_MAX}, got {mu}")
    tols = tol or Tolerances()
    if t_max is None:
        t_max = 50.0 + 8.0 / eps1

    sign = 1.0 if side == "a" else -1.0
    leg1 = None
    if eps1 < eps11 * (1.0 - 1e-12):
        fld = chart1_field(system, mu)
        if side == "r":
            fld = PolyField([p * -1.0 for p in fld.polys])
        exit_section = SectionSpec(index=0, value=eps11, direction=1)
        leg1 = integrate_to_section(
            fld, np.array([eps1, r1, y1, 0.0]), exit_section, t_max, tol=tols
        )
        r1_exit = r1 * np.sqrt(eps1 / eps11)
        if abs(leg1.end[1] - r1_exit) > 1e-6:
            raise SolverError(
                f"radial bookkeeping violated on the {side} leg: expected "
                f"r1={r1_exit} at the seam, got {leg1.end[1]}"
            )
        p1 = Chart1Point(eps11, r1_exit, leg1.end[2], leg1.end[3])
    else:
        # Zero-length entry leg: the start point already sits on the seam.
        p1 = Chart1Point(eps11, r1, y1, 0.0)

    # The chart change is exact on eps1 > 0; rebuild the radius from the
    # conserved quantity r1^2 eps1 of the launch data.
    boundary = Chart2Point(
        r2=r1 * np.sqrt(eps1),
        x2=-1.0 / eps11,
        y2=p1.y1 / np.sqrt(eps11),
        z2=p1.z1 / np.sqrt(eps11),
    )

    if t_max2 is None:
        t_max2 = 50.0 + 10.0 / max(boundary.r2, 1e-3)

    fld2 = chart2_field(system, boundary.r2, mu)
    if side == "r":
        fld2 = PolyField([p * -1.0 for p in fld2.polys])
    landing_section = SectionSpec(index=2, value=0.0, direction=int(sign))
    leg2 = integrate_to_section(
        fld2, boundary.state, landing_section, t_max2, tol=tols
    )
    landing = np.array([leg2.end[0], leg2.end[1]])
    gap = float(np.hypot(landing[0] - SINGULAR_LANDING[0], landing[1]))
    if gap > window:
        raise SolverError(
            f"{side} leg landed at ({landing[0]:.6g}, {landing[1]:.6g}), "
            f"{gap:.3g} away from the singular crossing (0.5, 0); the "
            f"connection window has radius {window}"
        )
    return SeparationValue(
        side=side, landing=landing, r2=boundary.r2, boundary=boundary,
        leg_chart1=leg1, leg_chart2=leg2, eps1=eps1, r1=r1, y1=y1, mu=mu,
        eps11=eps11,
    )


# ---------------------------------------------------------------------
# Centering predictor and the two-dimensional connection solve.
# ---------------------------------------------------------------------


# Pre-jump marker in the scaling chart: a leg crosses {z2 = -1} on its
# climb toward the corner before the jump-or-fall decision is made, so
# its y2 value there is defined on a far larger launch set than the
# landing itself.
CORNER_Z2 = -1.0


def _corner_arrival(system, side, eps1, r1, y1, mu, eps11, tol):
    """y2 value carried to the pre-jump marker {z2 = -+1} by one leg.

    The leg runs through the entry chart to the seam (zero-length when
    eps1 sits on the seam) and onward in the scaling chart to its first
    crossing of the marker, {z2 = -1} climbing for the attracting leg
    and mirrored to {z2 = +1} for the repelling leg.
    """
    _validate_side(side)
    sign = 1.0 if side == "a" else -1.0
    tols = tol or Tolerances()
    if eps1 < eps11 * (1.0 - 1e-12):
        fld = chart1_field(system, mu)
        if side == "r":
            fld = PolyField([p * -1.0 for p in fld.polys])
        exit_section = SectionSpec(index=0, value=eps11, direction=1)
        leg = integrate_to_section(
            fld, np.array([eps1, r1, y1, 0.0]), exit_section,
            50.0 + 8.0 / eps1, tol=tols
        )
        p1 = Chart1Point(eps11, leg.end[1], leg.end[2], leg.end[3])
    else:
        p1 = Chart1Point(eps11, r1, y1, 0.0)
    r2 = r1 * np.sqrt(eps1)
    state = np.array([
        -1.0 / eps11, p1.y1 / np.sqrt(eps11), p1.z1 / np.sqrt(eps11)
    ])
    fld2 = chart2_field(system, r2, mu)
    if side == "r":
        fld2 = PolyField([p * -1.0 for p in fld2.polys])
    marker = SectionSpec(index=2, value=sign * CORNER_Z2, direction=int(sign))
    leg2 = integrate_to_section(
        fld2, state, marker, 50.0 + 10.0 / max(r2, 1e-3), tol=tols
    )
    return float(leg2.end[1])


def _aligned_y1(system, eps1, r1, mu, eps11, tol, newton_tol=1e-10):
    """Launch height whose attracting leg hits the marker at y2 = 0.

    This compensates the slow drift of the whole approach (entry chart
    plus the scaling-chart ride toward the corner) and seeds the
    connection solve inside the landing window: a leg reaching the
    corner with a large y2 offset is captured by the fold curve instead
    of crossing {z2 = 0}.  Far from the seam the drift is large enough
    that a leg launched at y1 = 0 falls off the fold and never arrives,
    so the alignment is continued down a geometric ladder of entry
    sections, each Newton solve seeded with the previous rung's height.
    """
    tols = (tol or Tolerances()).with_(newton_tol=newton_tol)

    def align_at(rung, seed):
        r1_rung = r1 * np.sqrt(eps1 / rung)

        def arrival(x):
            return np.array([
                _corner_arrival(system, "a", rung, r1_rung, float(x[0]), mu,
                                eps11, tol)
            ])

        x, _info = newton_solve(arrival, np.array([seed]), tol=tols,
                                fd_step=1e-7)
        return float(x[0])

    if eps1 >= eps11 * (1.0 - 1e-12):
        return align_at(eps1, 0.0)

    # Walk the launch section down the leg's invariant cylinder
    # r1^2 eps1 = const, halving eps1 each hop and bisecting any hop
    # that leaves the Newton basin of the alignment.
    current = max(eps1, eps11 / 2.0)
    y1 = align_at(current, 0.0)
    bisections = 0
    while current > eps1:
        target = max(current / 2.0, eps1)
        while True:
            try:
                y1 = align_at(target, y1)
                break
            except SolverError:
                bisections += 1
                if bisections > 40:
                    raise
                target = np.sqrt(current * target)
        current = target
    return y1


def mu0_predictor(system, eps1, r1, *, eps11=EPS11_DEFAULT,
                  newton_tol=1e-10, tol=None):
    """Parameter value at which the forward and backward drifts pair up.

    Each leg accumulates a y offset by the time it reaches the pre-jump
    marker: the attracting leg integrates the slow drift forward, the
    repelling leg backward.  The connection can only close when the two
    offsets agree.  Launching both legs at the drift-compensated height
    of the attracting side reduces that pairing to a single marker
    arrival, whose zero in mu centers the full solve.  At r1 = 0 the
    drifts are odd in mu and the centered value is exactly 0.
    """
    eps1 = float(eps1)
    r1 = float(r1)
    if not 0.0 < eps1 <= EPS10 * (1.0 + 1e-12):
        raise ValueError(f"eps1 must lie in (0, {EPS10}], got {eps1}")
    if not 0.0 <= r1 <= R1_MAX:
        raise ValueError(f"r1 must lie in [0, {R1_MAX}], got {r1}")
    if r1 == 0.0:
        return 0.0

    def pairing(mu):
        y1 = _aligned_y1(system, eps1, r1, mu, eps11, tol,
                         newton_tol=newton_tol)
        return -_corner_arrival(system, "r", eps1, r1, y1, mu, eps11, tol)

    # The root can sit anywhere from O(r1^2 eps1) near the seam to
    # O(0.1) at large amplitude, and the pairing is undefined where a
    # leg falls off the fold, so bracket on an expanding grid (skipping
    # undefined points) before refining.
    known = {}
    for mu in (0.0, -4e-3, 4e-3, -1e-2, 1e-2, -2.5e-2, 2.5e-2, -6.25e-2,
               6.25e-2, -0.156, 0.156, -0.39, 0.39):
        try:
            known[mu] = pairing(mu)
        except SolverError:
            continue
        grid = sorted(known)
        for lo, hi in zip(grid, grid[1:]):
            if known[lo] == 0.0:
                return lo
            if known[hi] == 0.0:
                return hi
            if known[lo] * known[hi] < 0.0:
                return float(brentq(pairing, lo, hi, xtol=newton_tol,
                                    rtol=4.0 * np.finfo(float).eps))
    raise SolverError(
        f"drift pairing has no sign change for |mu| <= 0.39 at "
        f"(eps1={eps1}, r1={r1}); no centering value found"
    )


@dataclass(frozen=True)
class AmbientCycle:
    """Closed orbit sampled uniformly in arclength in ambient space."""

    points: np.ndarray
    eps: float
    mu: float
    closure_gap: float
    arclength: float


@dataclass(frozen=True)
class BranchPoint:
    """One solved cycle of the branch at amplitude h = r1."""

    h: float
    eps: float
    y1_star: float
    mu_star: float
    residual: float
    mu0: float
    jacobian_det: float
    iterations: int
    regime: str
    eps1: float
    eps11: float
    small: SmallBranchPoint = None
    cycle: AmbientCycle = None
    hausdorff: float = float("nan")


def _mismatch_jacobian(mismatch, v, step=1e-6):
    """Central-difference Jacobian of the landing mismatch."""
    jac = np.empty((2, 2))
    for j in range(2):
        dv = np.zeros(2)
        dv[j] = step
        jac[:, j] = (mismatch(v + dv) - mismatch(v - dv)) / (2.0 * step)
    return jac


def solve_connection(system, eps1, r1, *, eps11=EPS11_DEFAULT,
                     newton_tol=1e-10, fd_step=1e-6, det_floor=1e-2,
                     window=WINDOW_DEFAULT, mu_center=None, seed=None,
                     tol=None):
    """Newton solve of the landing mismatch over (y1, mu).

    The solve is seeded at the centered parameter mu0 and at the drift-
    compensated launch height, which places both legs inside the landing
    window; the unknowns are then preconditioned by the corner
    contraction rate, y1 = y1_seed + s*v0 and mu = mu0 + s*v1 with
    s = (eps1/eps11)^lambda(mu0), so the scaled mismatch has an
    order-one Jacobian all the way down to the singular limit.  Its
    determinant is checked against `det_floor`; a small value means the
    two landed manifolds are near tangency and the solve is reported as
    such rather than returned inaccurately.

    A caller continuing along a branch can pass the previous solution's
    parameter as `mu_center` to skip the bracketing predictor, or a full
    `seed` pair (y1, mu) to skip the launch alignment as well.
    """
    eps1 = float(eps1)
    r1 = float(r1)
    if not 0.0 < eps1 <= EPS10 * (1.0 + 1e-12):
        raise ValueError(f"eps1 must lie in (0, {EPS10}], got {eps1}")
    if not 0.0 <= r1 <= R1_MAX:
        raise ValueError(f"r1 must lie in [0, {R1_MAX}], got {r1}")

    if seed is not None:
        y1_seed, mu0 = float(seed[0]), float(seed[1])
    else:
        if mu_center is None:
            try:
                mu0 = mu0_predictor(system, eps1, r1, eps11=eps11,
                                    newton_tol=newton_tol, tol=tol)
            except SolverError:
                # Large amplitude pushes the centering curve out of its
                # domain; reach the point by continuation instead.
                return _amplitude_continued(
                    system, eps1, r1, eps11=eps11, newton_tol=newton_tol,
                    fd_step=fd_step, det_floor=det_floor, window=window,
                    tol=tol,
                )
        else:
            mu0 = float(mu_center)
        y1_seed = _aligned_y1(system, eps1, r1, mu0, eps11, tol,
                              newton_tol=newton_tol)
    scale = (eps1 / eps11) ** lambda_mu(mu0)

    def mismatch(v):
        y1 = y1_seed + scale * float(v[0])
        mu = mu0 + scale * float(v[1])
        sep_a = separation(system, "a", eps1, r1, y1, mu, eps11=eps11,
                           window=window, tol=tol)
        sep_r = separation(system, "r", eps1, r1, y1, mu, eps11=eps11,
                           window=window, tol=tol)
        return sep_r.landing - sep_a.landing

    tols = (tol or Tolerances()).with_(newton_tol=newton_tol)
    v, info = newton_solve(mismatch, np.zeros(2), tol=tols, fd_step=fd_step)
    jac = _mismatch_jacobian(mismatch, v)
    det = float(jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0])
    if abs(det) < det_floor:
        raise SolverError(
            f"near-tangency at (eps1={eps1}, r1={r1}): scaled landing "
            f"Jacobian determinant {det:.3e} is below the floor {det_floor}"
        )
    return BranchPoint(
        h=r1, eps=r1 * r1 * eps1, y1_star=y1_seed + scale * float(v[0]),
        mu_star=mu0 + scale * float(v[1]), residual=float(info["residual"]),
        mu0=mu0, jacobian_det=det, iterations=int(info["iterations"]),
        regime="connection", eps1=eps1, eps11=eps11,
    )


def _amplitude_continued(system, eps1, r1, *, eps11, newton_tol, fd_step,
                         det_floor, window, tol, step=0.025):
    """Reach (eps1, r1) by walking the amplitude up from a cold start.

    The centering construction behind the cold start is only valid while
    the paired drift has a root; at large amplitude the branch bends away
    from it.  Here we start at a fraction of the requested amplitude where
    the cold start works, then advance along the branch at fixed eps1 with
    polynomial extrapolation of the solved points as seeds.
    """
    kwargs = dict(eps11=eps11, newton_tol=newton_tol, fd_step=fd_step,
                  det_floor=det_floor, window=window, tol=tol)
    first = None
    for frac in (0.5, 0.25, 0.125, 0.0625):
        try:
            first = solve_connection(system, eps1, r1 * frac, **kwargs)
            break
        except SolverError:
            continue
    if first is None:
        raise SolverError(
            f"no cold-startable amplitude below r1={r1} at eps1={eps1}; "
            "connection continuation cannot begin"
        )
    solved = [(first.h, first.y1_star, first.mu_star)]
    n_steps = int(np.ceil((r1 - first.h) / step))
    targets = list(np.linspace(first.h, r1, n_steps + 1)[1:])
    bp = first
    while targets:
        r = targets[0]
        try:
            if len(solved) == 1:
                bp = solve_connection(system, eps1, r,
                                      mu_center=solved[-1][2], **kwargs)
            else:
                hs, ys, ms = zip(*solved[-3:])
                deg = len(hs) - 1
                seed = (float(np.polyval(np.polyfit(hs, ys, deg), r)),
                        float(np.polyval(np.polyfit(hs, ms, deg), r)))
                bp = solve_connection(system, eps1, r, seed=seed, **kwargs)
        except SolverError:
            if r - solved[-1][0] < 1e-4:
                raise
            targets.insert(0, 0.5 * (solved[-1][0] + r))
            continue
        targets.pop(0)
        solved.append((bp.h, bp.y1_star, bp.mu_star))
    return bp


# ---------------------------------------------------------------------
# Cycle reconstruction in ambient coordinates.
# ---------------------------------------------------------------------


def _sample_leg(traj, n):
    """Dense states of a trajectory at n uniform times, in time order."""
    ts = np.linspace(0.0, traj.t_end, n)
    states = np.atleast_2d(traj.sol(ts))
    if states.shape[0] != n:
        states = states.T
    return states


def _ambient_from_chart1(states):
    """Blow down chart-1 rows (eps1, r1, y1, z1) to ambient (x, y, z)."""
    r1 = states[:, 1]
    return np.column_stack([-r1 ** 2, r1 * states[:, 2], r1 * states[:, 3]])


def _ambient_from_chart2(states, r2):
    """Blow down chart-2 rows (x2, y2, z2) to ambient (x, y, z)."""
    return np.column_stack(
        [r2 ** 2 * states[:, 0], r2 * states[:, 1], r2 * states[:, 2]]
    )


def _resample_arclength(points, n_samples):
    """Resample a polyline uniformly in cumulative arclength."""
    deltas = np.linalg.norm(np.diff(points, axis=0), axis=1)
    keep = np.concatenate([[True], deltas > 0.0])
    points = points[keep]
    s = np.concatenate([[0.0], np.cumsum(
        np.linalg.norm(np.diff(points, axis=0), axis=1))])
    total = s[-1]
    grid = np.linspace(0.0, total, n_samples)
    resampled = np.column_stack(
        [np.interp(grid, s, points[:, k]) for k in range(points.shape[1])]
    )
    return resampled, float(total)


def reconstruct_cycle(system, bp, *, n_samples=800, samples_per_leg=400,
                      gap_tol=None, tol=None, window=WINDOW_DEFAULT):
    """Assemble the closed ambient orbit of a solved branch point.

    For a corner-connection point the four legs (chart-2 and chart-1
    pieces of the backward passage, then chart-1 and chart-2 pieces of
    the forward one) are re-flowed at the solved (y1, mu), blown down
    and concatenated in time order; the closure gap is the ambient
    distance between the two landings on {z2 = 0}.  Small-cycle points
    are re-flowed once around in the scaling chart instead.  The orbit
    is returned resampled uniformly in arclength.
    """
    tols = tol or Tolerances()
    if gap_tol is None:
        gap_tol = 10.0 * tols.event_tol

    if bp.regime == "small":
        return _reconstruct_small_cycle(system, bp, n_samples=n_samples,
                                        gap_tol=gap_tol, tol=tols)

    sep_a = separation(system, "a", bp.eps1, bp.h, bp.y1_star, bp.mu_star,
                       eps11=bp.eps11, window=window, tol=tols)
    sep_r = separation(system, "r", bp.eps1, bp.h, bp.y1_star, bp.mu_star,
                       eps11=bp.eps11, window=window, tol=tols)

    pieces = []
    # Backward legs reversed into forward time order: the repelling
    # landing comes first, then back through the seam to the section.
    pieces.append(
        _ambient_from_chart2(
            _sample_leg(sep_r.leg_chart2, samples_per_leg), sep_r.r2
        )[::-1]
    )
    if sep_r.leg_chart1 is not None:
        pieces.append(_ambient_from_chart1(
            _sample_leg(sep_r.leg_chart1, samples_per_leg))[::-1])
    if sep_a.leg_chart1 is not None:
        pieces.append(_ambient_from_chart1(
            _sample_leg(sep_a.leg_chart1, samples_per_leg)))
    pieces.append(
        _ambient_from_chart2(
            _sample_leg(sep_a.leg_chart2, samples_per_leg), sep_a.r2
        )
    )

    land_a, _ = blow_down_chart2(
        Chart2Point(sep_a.r2, *np.asarray(sep_a.leg_chart2.end))
    )
    land_r, _ = blow_down_chart2(
        Chart2Point(sep_r.r2, *np.asarray(sep_r.leg_chart2.end))
    )
    gap = float(np.linalg.norm(land_a - land_r))
    if gap > gap_tol:
        raise SolverError(
            f"cycle does not close: ambient landing gap {gap:.3e} exceeds "
            f"{gap_tol:.3e}; re-solve the branch point with a tighter "
            "newton_tol"
        )
    points, total = _resample_arclength(np.vstack(pieces), n_samples)
    return AmbientCycle(points=points, eps=bp.eps, mu=bp.mu_star,
                        closure_gap=gap, arclength=total)


def _reconstruct_small_cycle(system, bp, *, n_samples, gap_tol, tol):
    """One loop of a small cycle in the raw scaling chart, blown down."""
    sb = bp.small
    if sb is None:
        raise ValueError(
            "small-regime branch point carries no small-cycle solution"
        )
    res = solve_invariant_series(system, sb.r2, sb.mu2_bar,
                                 r2_max=max(0.1, sb.r2))
    rows = manifold_coeff_arrays(res)
    m1 = float(npoly.polyval(sb.y2_bar, rows[0]))
    m2 = float(npoly.polyval(sb.y2_bar, rows[1]))
    start = np.array([m1 - sb.h, sb.y2_bar, m2])
    fld = chart2_field(system, sb.r2, bp.mu_star)
    section = SectionSpec(index=2, value=m2, direction=-1,
                          guard_index=0, guard_sign=-1.0,
                          guard_value=m1 - 0.5 * sb.h)
    loop = integrate_to_section(fld, start, section, 200.0, tol=tol)
    states = _sample_leg(loop, 8 * n_samples)
    diff = loop.end - start
    gap = float(np.linalg.norm(
        np.array([sb.r2 ** 2 * diff[0], sb.r2 * diff[1], sb.r2 * diff[2]])))
    if gap > gap_tol:
        raise SolverError(
            f"small cycle does not close: ambient return gap {gap:.3e} "
            f"exceeds {gap_tol:.3e}"
        )
    points, total = _resample_arclength(
        _ambient_from_chart2(states, sb.r2), n_samples)
    return AmbientCycle(points=points, eps=sb.r2 ** 2, mu=bp.mu_star,
                        closure_gap=gap, arclength=total)


def ambient_reclosure(system, bp, *, tol=None, t_max=None):
    """Independent closure check of a solved cycle in ambient space.

    Integrates the unscaled fast-time system at (eps, mu_star) from the
    blown-down section point, forward over the attracting half and
    backward over the repelling half, each to its first crossing of
    {z = 0, x > 0}; the full period is covered by the two halves.  The
    repelling half must run backward because forward time amplifies
    transverse error at the fast rate there.  Returns the ambient gap
    between the two half-orbit endpoints.
    """
    tols = tol or Tolerances()
    eps = bp.eps
    if t_max is None:
        t_max = 100.0 + 20.0 * bp.h / eps + 20.0 / np.sqrt(eps)
    start = np.array([-bp.h ** 2, bp.h * bp.y1_star, 0.0])
    fld = system.fast_field(eps, bp.mu_star)
    fwd_section = SectionSpec(index=2, value=0.0, direction=1,
                              guard_index=0, guard_sign=1.0, guard_value=0.0)
    fwd = integrate_to_section(fld, start, fwd_section, t_max, tol=tols)
    bld = PolyField([p * -1.0 for p in fld.polys])
    bwd_section = SectionSpec(index=2, value=0.0, direction=-1,
                              guard_index=0, guard_sign=1.0, guard_value=0.0)
    bwd = integrate_to_section(bld, start, bwd_section, t_max, tol=tols)
    return float(np.linalg.norm(fwd.end - bwd.end))


# ---------------------------------------------------------------------
# Branch sweep with seam gluing.
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class CycleFamily:
    """Branch points ordered by amplitude, glued across the chart seam."""

    eps: float
    points: tuple
    seam_h: float
    seam_gap: float

    @property
    def h_values(self):
        return np.array([bp.h for bp in self.points])

    @property
    def mu_values(self):
        return np.array([bp.mu_star for bp in self.points])


def _solve_sweep_point(system, h, eps, eps11, newton_tol, tol,
                       mu_center=None, seed=None):
    """One sweep point: corner connection above the seam, small below."""
    eps1 = eps / h ** 2
    if eps1 <= eps11 * (1.0 + 1e-12):
        try:
            return solve_connection(system, min(eps1, eps11), h,
                                    eps11=eps11, newton_tol=newton_tol,
                                    mu_center=mu_center, seed=seed, tol=tol)
        except SolverError:
            if mu_center is None and seed is None:
                raise
            # The warm start can fall outside the thin Newton basin on a
            # coarse amplitude grid; redo the point from scratch.
            return solve_connection(system, min(eps1, eps11), h,
                                    eps11=eps11, newton_tol=newton_tol,
                                    tol=tol)
    r2 = np.sqrt(eps)
    sb = solve_small_branch(system, h * h / eps, r2, newton_tol=newton_tol,
                            tol=tol)
    # The section coordinate maps through the chart change as
    # y1 = y2 sqrt(eps1); the small-cycle section differs from {z1 = 0}
    # at O(r2), which is inside the seam tolerance.
    return BranchPoint(
        h=h, eps=eps, y1_star=sb.y2_bar * np.sqrt(eps1), mu_star=sb.mu,
        residual=sb.residual, mu0=float("nan"), jacobian_det=float("nan"),
        iterations=0, regime="small", eps1=eps1, eps11=eps11, small=sb,
    )


def branch_sweep(system, eps=1e-4, h_range=(0.01, 0.4), n_points=24, *,
                 eps11=EPS11_DEFAULT, seam_tol=SEAM_TOL, newton_tol=1e-10,
                 with_cycles=True, tol=None):
    """Solve the cycle family over an amplitude grid at fixed eps.

    Amplitudes at or above the seam h = sqrt(eps/eps11) are solved by
    the corner connection (eps1 = eps/h^2 <= eps11); smaller amplitudes
    fall in the scaling-chart regime and are solved by the small-cycle
    branch.  When the grid straddles the seam, both solvers are run at
    the seam amplitude and their mu values must agree within seam_tol.
    Successive mu values are also gap-tested against the documented
    slope bound of the branch.
    """
    if not eps > 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    if eps > 0.01:
        raise ValueError(
            f"eps={eps} is too large: the scaling-chart radius sqrt(eps) "
            "must stay within the slow-manifold validity box (eps <= 0.01)"
        )
    h_lo, h_hi = float(h_range[0]), float(h_range[1])
    if not 0.0 < h_lo < h_hi <= R1_MAX:
        raise ValueError(
            f"h_range must be increasing inside (0, {R1_MAX}], got "
            f"({h_lo}, {h_hi})"
        )
    if n_points < 2:
        raise ValueError(f"n_points must be at least 2, got {n_points}")

    grid = np.linspace(h_lo, h_hi, n_points)
    points = []
    prior = []
    for h in grid:
        # Transport the branch along the grid: the first corner point is
        # solved from scratch, the next reuses its parameter, and later
        # ones are seeded by polynomial extrapolation of the solved
        # branch, which stays accurate where the cold start's aligned
        # launch curve leaves its domain.
        mu_center = None
        seed = None
        if len(prior) == 1:
            mu_center = prior[-1][2]
        elif len(prior) >= 2:
            hs, ys, ms = zip(*prior[-3:])
            deg = len(hs) - 1
            seed = (float(np.polyval(np.polyfit(hs, ys, deg), h)),
                    float(np.polyval(np.polyfit(hs, ms, deg), h)))
        bp = _solve_sweep_point(system, float(h), eps, eps11, newton_tol,
                                tol, mu_center=mu_center, seed=seed)
        if bp.regime == "connection":
            prior.append((bp.h, bp.y1_star, bp.mu_star))
        points.append(bp)

    seam_h = float(np.sqrt(eps / eps11))
    seam_gap = float("nan")
    if grid[0] < seam_h < grid[-1]:
        bp_corner = solve_connection(system, eps11, seam_h, eps11=eps11,
                                     newton_tol=newton_tol, tol=tol)
        sb_seam = solve_small_branch(system, 1.0 / eps11, np.sqrt(eps),
                                     newton_tol=newton_tol, tol=tol)
        seam_gap = abs(bp_corner.mu_star - sb_seam.mu)
        if seam_gap > seam_tol:
            raise SolverError(
                f"seam mismatch at h={seam_h:.6g}: corner connection gives "
                f"mu={bp_corner.mu_star:.8e}, small-cycle branch gives "
                f"mu={sb_seam.mu:.8e}, gap {seam_gap:.3e} > {seam_tol}"
            )

    for left, right in zip(points, points[1:]):
        jump = abs(right.mu_star - left.mu_star)
        allowed = max(200.0 * (right.h - left.h), 1e-7)
        if jump > allowed:
            raise SolverError(
                f"mu-bar jump {jump:.3e} between h={left.h:.6g} and "
                f"h={right.h:.6g} exceeds the continuity allowance "
                f"{allowed:.3e}"
            )

    if with_cycles:
        dressed = []
        for bp in points:
            bp = replace(bp, cycle=reconstruct_cycle(system, bp, tol=tol))
            bp = replace(bp, hausdorff=hausdorff_to_singular(
                system, bp, bp.mu_star))
            dressed.append(bp)
        points = dressed
    return CycleFamily(eps=eps, points=tuple(points), seam_h=seam_h,
                       seam_gap=seam_gap)


# ---------------------------------------------------------------------
# Hausdorff distance to the singular canard cycle.
# ---------------------------------------------------------------------


def singular_cycle(system, h, mu, *, n_segment=400, n_fiber=200,
                   seed_offset=1e-6, t_max=200.0):
    """Ambient samples of the singular cycle at amplitude h.

    The slow segment is the strong singular canard: the orbit of the
    desingularized reduced flow through the folded singularity along its
    strong eigendirection, followed on both sheets until x = -h^2.  The
    fast fiber closes the cycle from the repelling endpoint straight
    down in z (x and y frozen in the layer problem) to the attracting
    sheet.
    """
    if h <= 0.0:
        raise ValueError(f"h must be positive, got {h}")
    fs = system.classify_folded_singularity(mu)
    if fs.kind == "focus":
        raise SolverError(
            "folded singularity is a focus: no strong eigendirection to "
            "seed the singular canard"
        )
    eigvals, vecs = np.linalg.eig(fs.jacobian)
    idx = int(np.argmax(np.abs(eigvals.real)))
    rate = float(eigvals.real[idx])
    v = np.real(vecs[:, idx])
    v = v / np.linalg.norm(v)

    reduced = system.reduced_field(mu)
    sign = 1.0 if rate > 0.0 else -1.0

    def rhs(_t, yz):
        return sign * reduced(yz)

    def reach_amplitude(_t, yz):
        return system.critical_manifold_x(yz[0], yz[1], mu) + h ** 2

    reach_amplitude.terminal = True
    reach_amplitude.direction = -1

    branches = []
    for orientation in (1.0, -1.0):
        seed = fs.point + orientation * seed_offset * v
        sol = solve_ivp(rhs, (0.0, t_max), seed, events=reach_amplitude,
                        rtol=1e-10, atol=1e-12, dense_output=True)
        if sol.t_events[0].size == 0:
            raise SolverError(
                f"singular canard branch did not reach x = -h^2 = {-h * h} "
                f"within t={t_max}"
            )
        t_end = float(sol.t_events[0][0])
        ts = np.linspace(0.0, t_end, n_segment)
        yz = sol.sol(ts).T
        xs = np.array([
            system.critical_manifold_x(p[0], p[1], mu) for p in yz
        ])
        branches.append(np.column_stack([xs, yz[:, 0], yz[:, 1]]))

    # The branch that exits on the repelling sheet (z > 0 near the fold)
    # carries the jump point; the fiber drops to the attracting z-root.
    rep = max(branches, key=lambda b: b[-1, 2])
    x_j, y_j, z_j = rep[-1]
    v_poly = system._v_poly(mu)

    def fiber_root(zv):
        return np.array([v_poly((x_j, y_j, zv[0]))])

    z_land, _ = newton_solve(fiber_root, np.array([-z_j]))
    zs = np.linspace(z_j, float(z_land[0]), n_fiber)
    fiber = np.column_stack([np.full(n_fiber, x_j), np.full(n_fiber, y_j), zs])
    return np.vstack(branches + [fiber])


def hausdorff_to_singular(system, bp, mu, **kwargs):
    """Symmetric Hausdorff distance of a cycle to the singular cycle."""
    if bp.cycle is None:
        raise ValueError(
            "branch point carries no reconstructed cycle; run "
            "reconstruct_cycle first"
        )
    sing = singular_cycle(system, bp.h, mu, **kwargs)
    cyc = bp.cycle.points
    d_cyc = cKDTree(sing).query(cyc)[0].max()
    d_sing = cKDTree(cyc).query(sing)[0].max()
    return float(max(d_cyc, d_sing))


# ---------------------------------------------------------------------
# External formats.
# ---------------------------------------------------------------------


def write_family_csv(family, path):
    """Write one row per branch point: h, eps, mu_bar, y1_star, residual,
    hausdorff."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("h,eps,mu_bar,y1_star,residual,hausdorff\n")
        for bp in family.points:
            fh.write(
                f"{bp.h:.16e},{bp.eps:.16e},{bp.mu_star:.16e},"
                f"{bp.y1_star:.16e},{bp.residual:.16e},{bp.hausdorff:.16e}\n"
            )


def write_family_json(family, path):
    """Dump the family with full orbit samples per branch point."""
    payload = {
        "eps": family.eps,
        "seam_h": family.seam_h,
        "seam_gap": family.seam_gap,
        "points": [
            {
                "h": bp.h,
                "eps": bp.eps,
                "mu_bar": bp.mu_star,
                "y1_star": bp.y1_star,
                "residual": bp.residual,
                "regime": bp.regime,
                "closure_gap": (
                    bp.cycle.closure_gap if bp.cycle is not None else None
                ),
                "orbit": (
                    bp.cycle.points.tolist() if bp.cycle is not None else None
                ),
            }
            for bp in family.points
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
