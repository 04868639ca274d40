"""The planar layer problem of the scaling chart.

At r2 = 0, mu = 0 the scaling-chart equations decouple: y2 freezes and
the (x2, z2) plane carries

    dx2/dt2 = y2 - z2,
    dz2/dt2 = x2 + z2^2,

independent of the coefficient tables (every table term carries a factor
of r2).  Within y2 = 0 the system is Hamiltonian with first integral

    H(x2, z2) = (x2 + z2^2 - 1/2) exp(2 x2),

whose zero level is the parabola z2^2 = 1/2 - x2.  Inside it (H < 0) the
plane is filled with closed orbits around the center at the origin; the
orbit through (-h, 0) is labelled by its amplitude h > 0 and has period
T0(h) -> 2 pi as h -> 0.  The curve x2 = -y2^2, z2 = y2 consists of
equilibria of the frozen family and is normally attracting for y2 < 0,
repelling for y2 > 0, with purely imaginary eigenvalues at y2 = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blowup_charts import Chart2Point
from .numerics import PolyField, SectionSpec, Trajectory, integrate_to_section
from .polyops import Poly

__all__ = [
    "LayerOrbit",
    "layer_field",
    "first_integral",
    "strong_canard_point",
    "c2_point",
    "c2_linearization",
    "classify_C2",
    "periodic_orbit",
    "write_orbit_csv",
]

LAYER_VARS = ("x2", "z2")


def layer_field(y2=0.0):
    """Frozen layer field on (x2, z2) at a fixed y2 value."""
    x2 = Poly.var(0, 2)
    z2 = Poly.var(1, 2)
    return PolyField([Poly.const(float(y2), 2) - z2, x2 + z2 * z2])


def first_integral(x2, z2):
    """Conserved quantity of the y2 = 0 layer flow (vectorized)."""
    x2 = np.asarray(x2, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    out = (x2 + z2**2 - 0.5) * np.exp(2.0 * x2)
    return float(out) if out.ndim == 0 else out


def strong_canard_point(mu, t2):
    """The singular strong-canard orbit at r2 = 0, parametrized by time.

    Returns the chart-2 point (-t2^2/4 + 1/2, mu*t2/2, t2/2); at mu = 0
    this traces the H = 0 separatrix within y2 = 0.
    """
    return Chart2Point(0.0, -(t2**2) / 4.0 + 0.5, 0.5 * mu * t2, 0.5 * t2)


def c2_point(y2):
    """Equilibrium of the frozen layer family: (x2, z2) = (-y2^2, y2)."""
    return Chart2Point(0.0, -(y2**2), y2, y2)


def c2_linearization(y2):
    """Planar Jacobian along the equilibrium curve and its eigenvalues."""
    jac = layer_field(y2).jacobian(np.array([-(y2**2), y2]))
    return jac, np.linalg.eigvals(jac)


def classify_C2(y2):
    """Normal stability of the equilibrium curve at a given y2."""
    if y2 < 0.0:
        return "attracting"
    if y2 > 0.0:
        return "repelling"
    return "degenerate"


@dataclass(frozen=True)
class LayerOrbit:
    """One closed layer orbit: amplitude label, period, and samples."""

    h: float
    period: float
    samples: Trajectory

    @property
    def conservation_defect(self):
        """Max relative drift of the first integral over the samples."""
        vals = first_integral(self.samples.ys[:, 0], self.samples.ys[:, 1])
        level = first_integral(-self.h, 0.0)
        return float(np.max(np.abs(vals - level)) / abs(level))


def periodic_orbit(h, tol=None, t_max=200.0):
    """Closed layer orbit through (-h, 0); the period is the return time.

    The orbit starts downward (dz2/dt = -h) and circles the origin once;
    the return is the first z2 = 0 crossing back on the negative x2 axis,
    which is again downward.  The positive-axis crossing halfway around
    is excluded by the x2 < 0 guard.
    """
    if h <= 0.0:
        raise ValueError(f"amplitude must be positive, got h={h}")
    section = SectionSpec(
        index=1, value=0.0, direction=-1,
        guard_index=0, guard_sign=-1.0, guard_value=0.0,
    )
    traj = integrate_to_section(
        layer_field(0.0), np.array([-h, 0.0]), section, t_max, tol=tol
    )
    return LayerOrbit(h=float(h), period=traj.t_event, samples=traj)


def write_orbit_csv(orbit, path):
    """Write orbit samples as CSV with columns t, x2, z2, H."""
    ts = orbit.samples.ts
    xs = orbit.samples.ys[:, 0]
    zs = orbit.samples.ys[:, 1]
    hs = first_integral(xs, zs)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,x2,z2,H\n")
        for row in zip(ts, xs, zs, np.atleast_1d(hs)):
            fh.write(",".join(f"{v:.16e}" for v in row) + "\n")
