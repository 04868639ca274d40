"""Analytic slow manifold of the scaling chart as a power-series fixed point.

Under the parameter scaling mu = r2 * mu2 the scaling-chart equations
have a one-dimensional attracting-to-repelling slow manifold through the
fold region, a graph (x2, z2) = m(y2) over y2.  It is computed in two
stages.

Stage A (formal matching): expand m = sum_n r2^n h_n(y2) and match
powers of r2 in the invariance equation

    F_u(m(y2), y2) = m'(y2) * dy2/dt,      dy2/dt = r2 * q(m(y2), y2),

where F_u collects the (x2, z2) components.  h0 = (-y2^2, y2) is the
critical curve; each further h_n solves a 2x2 linear system with the
unimodular layer matrix M(y2) = [[0, -1], [1, 2*y2]].

Stage B (contraction): write m = h0 + r2 h1 + r2^2 u(v) with the
recentered variable v = y2 + mu2 / (2 lam), lam = a1 + a2.  The
remainder u solves the fixed-point equation

    r2 v u' - A u = RHS(u),      A = (1/lam) [[0, -1], [1, -mu2/lam]],

whose left side acts diagonally on monomials v^n with matrix
r2*n*I - A.  Picard iteration with the coefficient-wise resolvent
converges geometrically for small r2, |mu2| and radius nu; the
iteration runs in a truncated coefficient space with the weighted norm

    ||u|| = sum_n |u_n|_2 nu^n.

A has a complex eigenvalue pair off the real axis for every real mu2,
so the resolvent exists at every r2*n >= 0 and the operator constant
C = sup_q (1+q) ||(q I - A)^{-1}|| is finite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blowup_charts import chart2_field_polys
from .numerics import ConvergenceError
from .polyops import (
    poly_on_series,
    poly_on_series2,
    s2_add,
    s2_mul,
    s2_scale,
    ser_add,
    ser_compose_affine,
    ser_diff,
    ser_eval,
    ser_mul,
)

__all__ = [
    "VectorPowerSeries",
    "ManifoldResult",
    "a_matrix",
    "resolvent_norm_constant",
    "formal_coefficients",
    "formal_defect_sup",
    "apply_T",
    "solve_invariant_series",
    "eval_manifold",
    "manifold_derivative",
    "manifold_coeff_arrays",
    "invariance_residual",
    "manifold_to_json_dict",
]


def _pad(a, n):
    a = np.asarray(a, dtype=float)
    if a.size >= n:
        return a[:n].copy()
    out = np.zeros(n)
    out[: a.size] = a
    return out


@dataclass(frozen=True)
class VectorPowerSeries:
    """Truncated R^2-valued power series sum_n c_n v^n with weight radius nu."""

    coeffs: np.ndarray  # (N+1, 2)
    nu: float

    def __post_init__(self):
        object.__setattr__(
            self, "coeffs", np.atleast_2d(np.asarray(self.coeffs, dtype=float))
        )
        if self.coeffs.shape[1] != 2:
            raise ValueError("coefficients must be an (N+1, 2) array")
        if self.nu <= 0.0:
            raise ValueError("radius nu must be positive")

    @property
    def order(self):
        return self.coeffs.shape[0] - 1

    @property
    def norm(self):
        """Weighted norm sum_n |c_n|_2 nu^n."""
        mags = np.linalg.norm(self.coeffs, axis=1)
        return float(np.sum(mags * self.nu ** np.arange(mags.size)))

    def tail_norm(self, fraction=0.1):
        """Weighted norm of the top ``fraction`` of coefficient degrees."""
        n = self.coeffs.shape[0]
        k = max(1, int(np.ceil(fraction * n)))
        mags = np.linalg.norm(self.coeffs[n - k:], axis=1)
        return float(np.sum(mags * self.nu ** np.arange(n - k, n)))

    def distance(self, other):
        n = max(self.coeffs.shape[0], other.coeffs.shape[0])
        a = np.zeros((n, 2))
        a[: self.coeffs.shape[0]] = self.coeffs
        b = np.zeros((n, 2))
        b[: other.coeffs.shape[0]] = other.coeffs
        mags = np.linalg.norm(a - b, axis=1)
        return float(np.sum(mags * self.nu ** np.arange(n)))

    def eval(self, v):
        """Evaluate at scalar or array v."""
        v = np.asarray(v, dtype=float)
        return np.stack(
            [ser_eval(self.coeffs[:, 0], v), ser_eval(self.coeffs[:, 1], v)],
            axis=-1,
        )

    def deriv(self):
        return VectorPowerSeries(
            np.stack(
                [
                    _pad(ser_diff(self.coeffs[:, 0]), max(1, self.order)),
                    _pad(ser_diff(self.coeffs[:, 1]), max(1, self.order)),
                ],
                axis=1,
            ),
            self.nu,
        )


def a_matrix(mu2, lam):
    """The constant matrix A(0, mu2) of the recentered linearization."""
    lam = float(lam)
    return np.array([[0.0, -1.0], [1.0, -mu2 / lam]]) / lam


def resolvent_norm_constant(mu2, lam, q_max=200.0, n_grid=4001):
    """Numerical sup of (1+q) ||(q I - A)^{-1}||_2 over q >= 0.

    This is the single constant C in the resolvent bound
    ||(q I - A)^{-1}|| <= C / (1 + q); the sup is attained at moderate q
    because the norm decays like 1/q, so a bounded grid suffices.
    """
    a = a_matrix(mu2, lam)
    qs = np.linspace(0.0, q_max, n_grid)
    eye = np.eye(2)
    best = 0.0
    for q in qs:
        norm = np.linalg.norm(np.linalg.inv(q * eye - a), 2)
        best = max(best, (1.0 + q) * norm)
    return best


def apply_T(series, r2, mu2, lam=1.0):
    """Coefficient-wise resolvent solve: out_n = (r2 n I - A)^{-1} in_n."""
    if r2 < 0.0:
        raise ValueError("r2 must be nonnegative")
    a = a_matrix(mu2, lam)
    eye = np.eye(2)
    coeffs = np.empty_like(series.coeffs)
    for n in range(series.coeffs.shape[0]):
        coeffs[n] = np.linalg.solve(r2 * n * eye - a, series.coeffs[n])
    return VectorPowerSeries(coeffs, series.nu)


# ---------------------------------------------------------------------
# Stage A: formal coefficients h_n(y2).
# ---------------------------------------------------------------------


def _planar_polys(system):
    """Chart-2 field components over (x2, y2, z2, r2, mu)."""
    polys = chart2_field_polys(system)
    return polys[0], polys[1], polys[2]


def formal_coefficients(system, mu2, order):
    """Polynomial coefficients h_0 .. h_order of the formal graph.

    Each h_n is a (2, deg+1) array of ascending y2-coefficients for the
    (x2, z2) components.  h_0 = (-y2^2, y2) always; h_n for n >= 1 solves
    M(y2) h_n = -delta_n with delta_n the r2^n defect coefficient of the
    previous truncation and M(y2) = [[0, -1], [1, 2 y2]] (det 1).
    """
    if order < 0:
        raise ValueError("order must be nonnegative")
    fx, fy, fz = _planar_polys(system)
    h = [np.array([[0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])]  # h0 rows: x2, z2

    for n in range(1, order + 1):
        nr = n + 1
        # Two-level series in (r2, y2) for the current truncation.
        m1 = [h[k][0] for k in range(len(h))]
        m2 = [h[k][1] for k in range(len(h))]
        subs = [
            m1,                                     # x2
            [np.array([0.0, 1.0])],                 # y2
            m2,                                     # z2
            [np.zeros(1), np.array([1.0])],         # r2 -> the series r
            [np.zeros(1), np.array([float(mu2)])],  # mu -> r2*mu2
        ]
        fu1 = poly_on_series2(fx, subs, nr)
        fu2 = poly_on_series2(fz, subs, nr)
        ydot = poly_on_series2(fy, subs, nr)
        m1d = [ser_diff(c) for c in m1]
        m2d = [ser_diff(c) for c in m2]
        defect1 = s2_add(fu1, s2_scale(s2_mul(m1d, ydot, nr), -1.0))
        defect2 = s2_add(fu2, s2_scale(s2_mul(m2d, ydot, nr), -1.0))
        d1 = defect1[n]
        d2 = defect2[n]
        # h_n = -M^{-1} delta_n with M^{-1} = [[2 y2, 1], [-1, 0]].
        two_y_d1 = ser_mul(np.array([0.0, 2.0]), d1, d1.size + 2)
        hn1 = -ser_add(two_y_d1, d2)
        hn2 = d1.copy()
        width = max(hn1.size, hn2.size)
        h.append(np.stack([_pad(hn1, width), _pad(hn2, width)]))
    return h


def _graph_arrays(coeffs, r2):
    """Collapse formal coefficients at numeric r2 into y2-coefficient rows."""
    width = max(c.shape[1] for c in coeffs)
    out = np.zeros((2, width))
    for n, c in enumerate(coeffs):
        out[:, : c.shape[1]] += r2**n * c
    return out


def formal_defect_sup(system, mu2, coeffs, r2, y2_grid=None):
    """Sup-norm of the invariance defect of a formal truncation at numeric r2.

    Independent check of Stage A: the defect of sum_{n<=k} r2^n h_n must
    scale like r2^(k+1).
    """
    if y2_grid is None:
        y2_grid = np.linspace(-0.2, 0.2, 21)
    fx, fy, fz = _planar_polys(system)
    rows = _graph_arrays(coeffs, r2)
    rows_d = np.stack([
        _pad(ser_diff(rows[0]), rows.shape[1]),
        _pad(ser_diff(rows[1]), rows.shape[1]),
    ])
    worst = 0.0
    for y2 in np.asarray(y2_grid, dtype=float):
        w1 = ser_eval(rows[0], y2)
        w2 = ser_eval(rows[1], y2)
        point = (w1, y2, w2, r2, r2 * mu2)
        ydot = fy(point)
        defect = np.array([
            fx(point) - ser_eval(rows_d[0], y2) * ydot,
            fz(point) - ser_eval(rows_d[1], y2) * ydot,
        ])
        worst = max(worst, float(np.max(np.abs(defect))))
    return worst


# ---------------------------------------------------------------------
# Stage B: the contraction fixed point for the analytic remainder.
# ---------------------------------------------------------------------


@dataclass
class ManifoldResult:
    """Computed slow-manifold graph with its back-transformations."""

    system: object
    r2: float
    mu2: float
    nu: float
    order: int
    series: VectorPowerSeries          # u(v), remainder at weight r2^2
    h_coeffs: list                     # Stage A h_0, h_1 (y2-polynomials)
    offset: float                      # v = y2 + offset
    iterations: int = 0
    distances: list = field(default_factory=list)

    @property
    def contraction_ratios(self):
        d = np.asarray(self.distances)
        if d.size < 2:
            return np.zeros(0)
        with np.errstate(divide="ignore", invalid="ignore"):
            return d[1:] / d[:-1]


def _numeric_polys(system, r2, mu2):
    fx, fy, fz = _planar_polys(system)
    mu = r2 * mu2
    out = []
    for p in (fx, fy, fz):
        out.append(p.subs_num(3, r2).subs_num(4, mu).restrict((0, 1, 2)))
    return out


class _StageBFrame:
    """Precomputed data shared by the Picard iteration and the residual."""

    def __init__(self, system, r2, mu2, n_len):
        self.lam = system.lam
        self.offset = mu2 / (2.0 * self.lam)
        self.h_coeffs = formal_coefficients(system, mu2, 1)
        self.polys = _numeric_polys(system, r2, mu2)
        self.a = a_matrix(mu2, self.lam)
        self.r2 = r2
        self.n_len = n_len
        self.y2_of_v = np.array([-self.offset, 1.0])
        self.wbar = np.stack([
            ser_add(
                _pad(ser_compose_affine(self.h_coeffs[0][i], -self.offset,
                                        1.0, n_len), n_len),
                r2 * _pad(ser_compose_affine(self.h_coeffs[1][i], -self.offset,
                                             1.0, n_len), n_len),
            )
            for i in range(2)
        ])
        self.wbar_d = np.stack(
            [_pad(ser_diff(self.wbar[i]), n_len) for i in range(2)]
        )

    def rhs(self, u):
        """RHS(u) of the fixed-point equation, as a (2, n_len) array."""
        fx_p, fy_p, fz_p = self.polys
        r2, lam, n_len = self.r2, self.lam, self.n_len
        w1 = ser_add(self.wbar[0], r2**2 * u[0])
        w2 = ser_add(self.wbar[1], r2**2 * u[1])
        subs = [w1, self.y2_of_v, w2]
        fu1 = _pad(poly_on_series(fx_p, subs, n_len), n_len)
        fu2 = _pad(poly_on_series(fz_p, subs, n_len), n_len)
        ydot = _pad(poly_on_series(fy_p, subs, n_len), n_len)
        g1 = (fu1 - ser_mul(self.wbar_d[0], ydot, n_len)) / (r2**2 * lam)
        g2 = (fu2 - ser_mul(self.wbar_d[1], ydot, n_len)) / (r2**2 * lam)
        # r2 (q/lam - v) u' with q = ydot / r2.
        qlv = ydot / (r2 * lam)
        qlv[1] -= 1.0
        u1d = _pad(ser_diff(u[0]), n_len)
        u2d = _pad(ser_diff(u[1]), n_len)
        a = self.a
        rhs1 = (g1 - a[0, 0] * u[0] - a[0, 1] * u[1]
                - r2 * ser_mul(qlv, u1d, n_len))
        rhs2 = (g2 - a[1, 0] * u[0] - a[1, 1] * u[1]
                - r2 * ser_mul(qlv, u2d, n_len))
        return np.stack([_pad(rhs1, n_len), _pad(rhs2, n_len)])


def solve_invariant_series(system, r2, mu2, nu=0.2, N=40, max_iter=100,
                           fp_tol=1e-12, sigma_factor=4.0, u0=None,
                           r2_max=0.1, mu2_max=0.1, nu_max=0.2):
    """Picard iteration for the analytic remainder u of the slow manifold.

    Returns a ManifoldResult whose graph is

        m(y2) = h0(y2) + r2 h1(y2) + r2^2 u(y2 + mu2/(2 lam)).

    At r2 = 0 the remainder is identically zero and the manifold is the
    critical curve.  The smallness bounds r2_max, mu2_max, nu_max mark
    the supported contraction regime; they can be raised explicitly, in
    which case the growth detectors (three consecutive increasing
    distances, escape from the sigma ball, non-finite coefficients)
    police convergence and raise ConvergenceError.
    """
    if r2 < 0.0:
        raise ValueError("r2 must be nonnegative")
    if r2 > r2_max or abs(mu2) > mu2_max:
        raise ValueError(
            f"(r2={r2}, mu2={mu2}) outside the configured smallness "
            f"bounds (r2_max={r2_max}, mu2_max={mu2_max})"
        )
    if nu > nu_max:
        raise ValueError(f"nu={nu} exceeds nu_max={nu_max}")
    n_len = N + 1

    if r2 == 0.0:
        lam = system.lam
        return ManifoldResult(
            system=system, r2=0.0, mu2=mu2, nu=nu, order=N,
            series=VectorPowerSeries(np.zeros((n_len, 2)), nu),
            h_coeffs=formal_coefficients(system, mu2, 1),
            offset=mu2 / (2.0 * lam),
        )

    frame = _StageBFrame(system, r2, mu2, n_len)
    eye = np.eye(2)
    resolvents = [np.linalg.inv(r2 * n * eye - frame.a) for n in range(n_len)]

    if u0 is None:
        u = np.zeros((2, n_len))
    else:
        u_in = u0.coeffs.T if isinstance(u0, VectorPowerSeries) else np.asarray(u0)
        u = np.stack([_pad(u_in[0], n_len), _pad(u_in[1], n_len)])

    def weighted(arr):
        mags = np.linalg.norm(arr, axis=0)
        return float(np.sum(mags * nu ** np.arange(mags.size)))

    distances = []
    grow_streak = 0
    ball = None
    for it in range(1, max_iter + 1):
        rhs = frame.rhs(u)
        u_new = np.empty_like(u)
        for n in range(n_len):
            u_new[:, n] = resolvents[n] @ rhs[:, n]
        if not np.all(np.isfinite(u_new)):
            raise ConvergenceError(
                "slow-manifold iteration overflowed the truncation space"
            )
        dist = weighted(u_new - u)
        distances.append(dist)
        if len(distances) > 1 and dist > distances[-2]:
            grow_streak += 1
        else:
            grow_streak = 0
        if grow_streak >= 3:
            raise ConvergenceError(
                f"slow-manifold iteration is not contracting at r2={r2}, "
                f"mu2={mu2} (last distances {distances[-4:]})"
            )
        u = u_new
        unorm = weighted(u)
        if ball is None:
            ball = max(unorm, 1e-300)
        elif unorm > sigma_factor * ball:
            raise ConvergenceError(
                f"slow-manifold iterate left the sigma ball at r2={r2}, "
                f"mu2={mu2}"
            )
        # An fp_tol below the rounding floor of the weighted norm still
        # terminates once the distances reach that floor.
        floor = 64.0 * np.finfo(float).eps * (1.0 + unorm)
        if dist <= max(fp_tol, floor):
            break
    else:
        raise ConvergenceError(
            f"slow-manifold iteration did not reach fp_tol={fp_tol} in "
            f"{max_iter} iterations (last distance {distances[-1]})"
        )

    return ManifoldResult(
        system=system, r2=r2, mu2=mu2, nu=nu, order=N,
        series=VectorPowerSeries(u.T.copy(), nu),
        h_coeffs=frame.h_coeffs, offset=frame.offset,
        iterations=it, distances=distances,
    )


def manifold_coeff_arrays(res):
    """The graph m(y2) as a (2, len) array of ascending y2-coefficients."""
    n_len = res.order + 1
    base = _graph_arrays(res.h_coeffs, res.r2)
    width = max(base.shape[1], n_len)
    out = np.zeros((2, width))
    out[:, : base.shape[1]] += base
    for i in range(2):
        shifted = ser_compose_affine(res.series.coeffs[:, i], res.offset, 1.0,
                                     width)
        out[i, : shifted.size] += res.r2**2 * shifted
    return out


def eval_manifold(res, y2):
    """Graph value (x2, z2) at y2; rejects points outside the radius."""
    y2 = np.asarray(y2, dtype=float)
    v = y2 + res.offset
    if np.any(np.abs(v) > res.nu + 1e-12):
        raise ValueError(
            f"recentered coordinate |v|={np.max(np.abs(v))} exceeds the "
            f"series radius nu={res.nu}"
        )
    rows = _graph_arrays(res.h_coeffs, res.r2)
    base = np.stack([ser_eval(rows[0], y2), ser_eval(rows[1], y2)], axis=-1)
    return base + res.r2**2 * res.series.eval(v)


def manifold_derivative(res, y2):
    """d m / d y2 at y2 (the recentering has unit slope)."""
    y2 = np.asarray(y2, dtype=float)
    v = y2 + res.offset
    rows = _graph_arrays(res.h_coeffs, res.r2)
    base = np.stack(
        [ser_eval(ser_diff(rows[0]), y2), ser_eval(ser_diff(rows[1]), y2)],
        axis=-1,
    )
    return base + res.r2**2 * res.series.deriv().eval(v)


def invariance_residual(res, grid=None):
    """Sup over a v-grid of |r2 v u' - A u - RHS(u)| at the computed series.

    This is the pointwise residual of the fixed-point equation solved by
    solve_invariant_series; zero exactly at r2 = 0.
    """
    if res.r2 == 0.0:
        return 0.0
    if grid is None:
        grid = np.linspace(-res.nu, res.nu, 41)
    grid = np.asarray(grid, dtype=float)
    if np.any(np.abs(grid) > res.nu + 1e-12):
        raise ValueError("residual grid extends beyond the series radius")
    # Evaluate RHS at full polynomial length so the truncation tail of the
    # stored series shows up in the residual instead of being cut away.
    n_len = res.order + 1
    deg = max(
        max(sum(e[:3]) for e in p.terms)
        for p in _numeric_polys(res.system, res.r2, res.mu2)
    )
    frame = _StageBFrame(res.system, res.r2, res.mu2,
                         max(deg, 1) * res.order + 4)
    u = np.stack([
        _pad(res.series.coeffs[:, 0], frame.n_len),
        _pad(res.series.coeffs[:, 1], frame.n_len),
    ])
    rhs = frame.rhs(u)
    ud = np.stack([_pad(ser_diff(u[0]), n_len), _pad(ser_diff(u[1]), n_len)])
    worst = 0.0
    for v in grid:
        uv = res.series.eval(v)
        lhs = res.r2 * v * np.array([ser_eval(ud[0], v), ser_eval(ud[1], v)])
        lhs = lhs - frame.a @ uv
        rv = np.array([ser_eval(rhs[0], v), ser_eval(rhs[1], v)])
        worst = max(worst, float(np.max(np.abs(lhs - rv))))
    return worst


def manifold_to_json_dict(res, residual=None):
    """JSON-ready summary of a manifold solve."""
    return {
        "r2": res.r2,
        "mu2": res.mu2,
        "nu": res.nu,
        "order": res.order,
        "offset": res.offset,
        "series_coeffs": res.series.coeffs.tolist(),
        "series_norm": res.series.norm,
        "tail_norm": res.series.tail_norm(),
        "h0": res.h_coeffs[0].tolist(),
        "h1": res.h_coeffs[1].tolist(),
        "iterations": res.iterations,
        "distances": list(res.distances),
        "residual": residual,
    }
