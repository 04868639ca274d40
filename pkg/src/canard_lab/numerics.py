"""Shared numerics: polynomial fields, integration driver, Newton solver.

The integrator is the package's single ODE engine: an adaptive
Dormand-Prince 5(4) pair with a quartic dense-output interpolant and
linear-section event location, running on either the compiled or the
numpy kernel (see ``backend``). Every production vector field in the
package is a sparse polynomial in its state variables, so one kernel
covers the ambient equations, both blowup charts, the layer problem and
the Melnikov system.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .backend import solve_poly_rk45
from .polyops import Poly

__all__ = [
    "CanardLabError",
    "SystemValidationError",
    "SolverError",
    "ConvergenceError",
    "Tolerances",
    "SectionSpec",
    "PolyField",
    "Trajectory",
    "integrate",
    "integrate_to_section",
    "newton_solve",
]


class CanardLabError(Exception):
    """Base class for package errors."""


class SystemValidationError(CanardLabError, ValueError):
    """A monomial table violates the normal-form order conditions."""


class SolverError(CanardLabError, RuntimeError):
    """An integration or root solve failed."""


class ConvergenceError(SolverError):
    """An iteration did not reach its tolerance."""


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances shared across the package."""

    abs_tol: float = 1e-12
    rel_tol: float = 1e-12
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    event_tol: float = 1e-12
    max_steps: int = 5_000_000

    def with_(self, **kw):
        vals = self.__dict__ | kw
        return Tolerances(**vals)


@dataclass(frozen=True)
class SectionSpec:
    """Linear section {y[index] = value} with crossing direction.

    direction: +1 fires when the component crosses upward, -1 downward,
    0 either way. An optional linear guard requires
    guard_sign * (y[guard_index] - guard_value) > 0 at the event point;
    crossings failing the guard are skipped. Events are armed only after
    |y[index] - value| has exceeded the arming threshold once, so a
    trajectory may start exactly on its own section.
    """

    index: int
    value: float = 0.0
    direction: int = 0
    guard_index: int | None = None
    guard_sign: float = 1.0
    guard_value: float = 0.0


class PolyField:
    """Autonomous polynomial vector field dy/dt = f(y)."""

    def __init__(self, polys):
        self.polys = list(polys)
        self.nstate = len(self.polys)
        for p in self.polys:
            if not isinstance(p, Poly) or p.nvars != self.nstate:
                raise ValueError("each component must be a Poly in the state vars")
        coeff_list = []
        expt_list = []
        eq_list = []
        for i, p in enumerate(self.polys):
            c, e = p.arrays()
            coeff_list.append(c)
            expt_list.append(e)
            eq_list.append(np.full(len(c), i, dtype=np.int64))
        self.coeffs = (
            np.concatenate(coeff_list) if coeff_list else np.zeros(0)
        )
        self.expts = (
            np.concatenate(expt_list)
            if expt_list
            else np.zeros((0, self.nstate), dtype=np.int64)
        )
        self.eq_idx = (
            np.concatenate(eq_list) if eq_list else np.zeros(0, dtype=np.int64)
        )

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        return np.array([p(y) for p in self.polys])

    def jacobian(self, y):
        """Exact Jacobian via monomial differentiation."""
        y = np.asarray(y, dtype=float)
        out = np.empty((self.nstate, self.nstate))
        for i, p in enumerate(self.polys):
            for j in range(self.nstate):
                out[i, j] = p.deriv(j)(y)
        return out


@dataclass
class Trajectory:
    """Result of one integration: step nodes plus dense-output data."""

    ts: np.ndarray
    ys: np.ndarray
    hs: np.ndarray
    qs: np.ndarray
    status: int
    n_rejected: int = 0
    event_hit: bool = field(default=False)

    @property
    def t_end(self):
        return float(self.ts[-1])

    @property
    def end(self):
        return self.ys[-1].copy()

    @property
    def t_event(self):
        if not self.event_hit:
            raise SolverError("trajectory has no event")
        return float(self.ts[-1])

    def sol(self, t):
        """Dense evaluation at scalar or array times within the span."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        if self.hs.size == 0:
            out = np.tile(self.ys[0], (t_arr.size, 1))
            return out[0] if np.isscalar(t) or np.asarray(t).ndim == 0 else out
        starts = self.ts[:-1]
        sign = 1.0 if (self.ts[-1] >= self.ts[0]) else -1.0
        key = sign * t_arr
        idx = np.searchsorted(sign * starts, key, side="right") - 1
        idx = np.clip(idx, 0, self.hs.size - 1)
        x = (t_arr - starts[idx]) / self.hs[idx]
        powers = np.stack([x, x**2, x**3, x**4], axis=1)
        out = self.ys[idx] + self.hs[idx, None] * np.einsum(
            "mnc,mc->mn", self.qs[idx], powers
        )
        if np.asarray(t).ndim == 0:
            return out[0]
        return out


def _initial_step(fld, y0, t0, t1, rtol, atol, hmax):
    """Hairer's starting-step heuristic (order 5)."""
    f0 = fld(y0)
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    direction = 1.0 if t1 >= t0 else -1.0
    y1 = y0 + h0 * direction * f0
    f1 = fld(y1)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, hmax, abs(t1 - t0))


def integrate(fld, y0, t_span, tol=None, max_step=np.inf, section=None,
              arm_factor=10.0):
    """Integrate a PolyField over t_span, optionally until a section event.

    Returns a Trajectory; raises SolverError on step underflow or step
    budget exhaustion. A section that never fires is not an error here
    (status 0, event_hit False); use integrate_to_section to require it.
    """
    tol = tol or Tolerances()
    t0, t1 = float(t_span[0]), float(t_span[1])
    y0 = np.asarray(y0, dtype=float)
    if y0.shape != (fld.nstate,):
        raise ValueError("initial state has wrong dimension")
    if t1 == t0:
        return Trajectory(
            ts=np.array([t0]), ys=y0[None, :].copy(), hs=np.zeros(0),
            qs=np.zeros((0, fld.nstate, 4)), status=0,
        )
    h0 = _initial_step(fld, y0, t0, t1, tol.rel_tol, tol.abs_tol, max_step)
    if section is None:
        ev = (-1, 0.0, 0, -1, 1.0, 0.0)
    else:
        gi = -1 if section.guard_index is None else int(section.guard_index)
        ev = (
            int(section.index),
            float(section.value),
            int(section.direction),
            gi,
            float(section.guard_sign),
            float(section.guard_value),
        )
    status, ts, ys, hs, qs, nrej = solve_poly_rk45(
        fld.coeffs, fld.expts, fld.eq_idx, fld.nstate,
        y0, t0, t1, tol.rel_tol, tol.abs_tol, h0, max_step, tol.max_steps,
        ev[0], ev[1], ev[2], ev[3], ev[4], ev[5],
        tol.event_tol, arm_factor * tol.event_tol,
    )
    if status == -1:
        raise SolverError(f"step size underflow at t={ts[-1]!r}")
    if status == -2:
        raise SolverError(
            f"integration exceeded {tol.max_steps} steps (t={ts[-1]!r})"
        )
    return Trajectory(
        ts=ts, ys=ys, hs=hs, qs=qs, status=status, n_rejected=nrej,
        event_hit=(status == 1),
    )


def integrate_to_section(fld, y0, section, t_max, tol=None, t0=0.0,
                         max_step=np.inf):
    """Integrate until the section fires; raise SolverError if it never does."""
    traj = integrate(fld, y0, (t0, t_max), tol=tol, max_step=max_step,
                     section=section)
    if not traj.event_hit:
        raise SolverError(
            f"section y[{section.index}]={section.value} not reached by "
            f"t={t_max} (final state {traj.end})"
        )
    return traj


def newton_solve(fun, x0, tol=None, fd_step=None, max_halvings=8,
                 raise_on_fail=True):
    """Damped Newton with forward-difference Jacobian.

    fun maps an (n,) array to an (n,) array. Returns (x, info) where info
    holds the residual norm, iteration count and convergence flag.
    """
    tol = tol or Tolerances()
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    n = x.size
    fx = np.atleast_1d(np.asarray(fun(x), dtype=float))
    if fx.size != n:
        raise ValueError("fun must return a vector matching x0")
    info = {"iterations": 0, "converged": False, "residual": float(np.max(np.abs(fx)))}
    for it in range(1, tol.newton_max_iter + 1):
        if np.max(np.abs(fx)) <= tol.newton_tol:
            info.update(converged=True, iterations=it - 1,
                        residual=float(np.max(np.abs(fx))))
            return x, info
        jac = np.empty((n, n))
        for j in range(n):
            step = (fd_step if fd_step is not None
                    else np.sqrt(np.finfo(float).eps) * max(1.0, abs(x[j])))
            xp = x.copy()
            xp[j] += step
            jac[:, j] = (np.atleast_1d(fun(xp)) - fx) / step
        try:
            delta = np.linalg.solve(jac, -fx)
        except np.linalg.LinAlgError as exc:
            if raise_on_fail:
                raise ConvergenceError(f"singular Jacobian at x={x}") from exc
            info.update(iterations=it, residual=float(np.max(np.abs(fx))))
            return x, info
        norm0 = np.max(np.abs(fx))
        lam = 1.0
        for _ in range(max_halvings + 1):
            x_try = x + lam * delta
            f_try = np.atleast_1d(np.asarray(fun(x_try), dtype=float))
            if np.max(np.abs(f_try)) < norm0 or lam < 1.0 / (1 << max_halvings):
                break
            lam *= 0.5
        x, fx = x_try, f_try
        info.update(iterations=it, residual=float(np.max(np.abs(fx))))
    if np.max(np.abs(fx)) <= tol.newton_tol:
        info["converged"] = True
        return x, info
    if raise_on_fail:
        raise ConvergenceError(
            f"Newton did not converge: residual {np.max(np.abs(fx)):.3e} "
            f"after {tol.newton_max_iter} iterations at x={x}"
        )
    return x, info
