"""Blowup charts at the degenerate fold point and their vector fields.

The origin of the fast system (where the fold line meets the vanishing
slow flow) is desingularized by the weighted blowup

    x = rb^2 xb,  y = rb yb,  z = rb zb,  eps = rb^2 epsb,

studied in two affine charts.  The entry chart fixes xb = -1 and carries
coordinates (eps1, r1, y1, z1):

    x = -r1^2,  y = r1 y1,  z = r1 z1,  eps = r1^2 eps1.

The scaling chart fixes epsb = 1 and carries (x2, y2, z2) at constant
radius r2 = sqrt(eps):

    x = r2^2 x2,  y = r2 y2,  z = r2 z2,  eps = r2^2.

Both desingularized fields are polynomial.  Each monomial of the F, G, H
tables pushes forward to a single monomial times a power of the chart
radius, and the order conditions enforced by `SlowFastSystem` make every
division by that radius exact, so the fields are assembled symbolically
once per system and never divided numerically.

Time conventions: the chart-1 field is the fast field divided by r1, the
chart-2 field is the fast field divided by r2.  Where the charts overlap
(eps1 > 0) the time variables are related by dt2/dt1 = sqrt(eps1), which
is the factor relating the pushforward of `field_chart1` to
`field_chart2`.  Along chart-1 orbits r1^2 eps1 = eps is conserved
exactly; along chart-2 orbits r2 is a constant by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import PolyField
from .polyops import Poly
from .system_model import SlowFastSystem

__all__ = [
    "CHART1_VARS",
    "CHART2_VARS",
    "Chart1Point",
    "Chart2Point",
    "blow_down_chart1",
    "blow_down_chart2",
    "chart1_to_chart2",
    "chart2_to_chart1",
    "chart1_field_polys",
    "chart2_field_polys",
    "chart1_field",
    "chart2_field",
    "field_chart1",
    "field_chart2",
]

# Variable order of the symbolic chart fields.  The trailing slots hold
# the quantities that are constant along orbits (mu in chart 1; r2 and
# mu in chart 2) so they can be substituted away before integration.
CHART1_VARS = ("eps1", "r1", "y1", "z1", "mu")
CHART2_VARS = ("x2", "y2", "z2", "r2", "mu")

_E1, _R1, _Y1, _Z1 = range(4)
_X2, _Y2, _Z2, _R2 = range(4)


@dataclass(frozen=True)
class Chart1Point:
    """Point in the entry chart; eps1 and r1 are nonnegative radii."""

    eps1: float
    r1: float
    y1: float
    z1: float

    def __post_init__(self):
        if self.eps1 < 0.0 or self.r1 < 0.0:
            raise ValueError(
                f"chart-1 point needs eps1 >= 0 and r1 >= 0, "
                f"got eps1={self.eps1}, r1={self.r1}"
            )

    @property
    def state(self):
        """Integration state (eps1, r1, y1, z1)."""
        return np.array([self.eps1, self.r1, self.y1, self.z1])

    @classmethod
    def from_state(cls, state):
        eps1, r1, y1, z1 = np.asarray(state, dtype=float)
        return cls(eps1, r1, y1, z1)


@dataclass(frozen=True)
class Chart2Point:
    """Point in the scaling chart; r2 = sqrt(eps) is a constant radius."""

    r2: float
    x2: float
    y2: float
    z2: float

    def __post_init__(self):
        if self.r2 < 0.0:
            raise ValueError(f"chart-2 point needs r2 >= 0, got r2={self.r2}")

    @property
    def state(self):
        """Integration state (x2, y2, z2); r2 rides along as a parameter."""
        return np.array([self.x2, self.y2, self.z2])

    @classmethod
    def from_state(cls, state, r2):
        x2, y2, z2 = np.asarray(state, dtype=float)
        return cls(r2, x2, y2, z2)


def blow_down_chart1(p):
    """Map a chart-1 point to ambient coordinates.

    Returns ((x, y, z), eps) with x = -r1^2, y = r1 y1, z = r1 z1 and
    eps = r1^2 eps1.  At r1 = 0 the whole chart collapses to the origin
    with eps = 0.
    """
    xyz = np.array([-p.r1 ** 2, p.r1 * p.y1, p.r1 * p.z1])
    return xyz, p.r1 ** 2 * p.eps1


def blow_down_chart2(p):
    """Map a chart-2 point to ambient coordinates.

    Returns ((x, y, z), eps) with x = r2^2 x2, y = r2 y2, z = r2 z2 and
    eps = r2^2.
    """
    xyz = np.array([p.r2 ** 2 * p.x2, p.r2 * p.y2, p.r2 * p.z2])
    return xyz, p.r2 ** 2


def chart1_to_chart2(p):
    """Change coordinates from the entry chart to the scaling chart.

    Defined on eps1 > 0, where

        r2 = r1 sqrt(eps1), x2 = -1/eps1, y2 = y1/sqrt(eps1),
        z2 = z1/sqrt(eps1).
    """
    if p.eps1 <= 0.0:
        raise ValueError(
            f"chart change needs eps1 > 0, got eps1={p.eps1}: the charts "
            "overlap only over the open half-space x < 0"
        )
    s = np.sqrt(p.eps1)
    return Chart2Point(p.r1 * s, -1.0 / p.eps1, p.y1 / s, p.z1 / s)


def chart2_to_chart1(p):
    """Change coordinates from the scaling chart to the entry chart.

    Defined on x2 < 0, where

        eps1 = -1/x2, r1 = r2 sqrt(-x2), y1 = y2/sqrt(-x2),
        z1 = z2/sqrt(-x2).

    Inverse of `chart1_to_chart2` on the overlap.
    """
    if p.x2 >= 0.0:
        raise ValueError(
            f"chart change needs x2 < 0, got x2={p.x2}: the charts "
            "overlap only over the open half-space x < 0"
        )
    s = np.sqrt(-p.x2)
    return Chart1Point(-1.0 / p.x2, p.r2 * s, p.y2 / s, p.z2 / s)


def _push_chart2(table, role):
    """Pushforward of a monomial table into the scaling chart.

    c x^i y^j z^k eps^l mu^m  ->  c r2^(2i+j+k+2l-2) x2^i y2^j z2^k mu^m,

    where the -2 absorbs the division by r2^2 that the chart-2 equations
    perform on each table.  The order conditions guarantee the exponent
    is nonnegative.
    """
    terms = {}
    for (i, j, k, l, m), c in table.poly.terms.items():
        p = 2 * i + j + k + 2 * l - 2
        if p < 0:
            raise ValueError(
                f"{role} table monomial with exponents {(i, j, k, l, m)} "
                "is too low order for the chart-2 division"
            )
        key = (i, j, k, p, m)
        terms[key] = terms.get(key, 0.0) + c
    return Poly(5, terms)


def _push_chart1(table, role, r_power):
    """Pushforward of a monomial table into the entry chart.

    c x^i y^j z^k eps^l mu^m
        ->  c (-1)^i r1^(2i+j+k+2l-r_power) eps1^l y1^j z1^k mu^m,

    with r_power the exact division by r1 the chart-1 equations perform
    (2 for F and H, 1 for G).
    """
    terms = {}
    for (i, j, k, l, m), c in table.poly.terms.items():
        p = 2 * i + j + k + 2 * l - r_power
        if p < 0:
            raise ValueError(
                f"{role} table monomial with exponents {(i, j, k, l, m)} "
                "is too low order for the chart-1 division"
            )
        key = (l, p, j, k, m)
        terms[key] = terms.get(key, 0.0) + ((-1.0) ** i) * c
    return Poly(5, terms)


def chart2_field_polys(system):
    """Symbolic desingularized field of the scaling chart.

    Returns three `Poly` over CHART2_VARS = (x2, y2, z2, r2, mu):

        dx2/dt2 = y2 - (mu+1) z2 + r2 F2
        dy2/dt2 = mu/2 + r2 (a1 y2 + a2 z2) + r2^2 G2
        dz2/dt2 = x2 + z2^2 + r2 z2 H2

    where F2, G2, H2 are the pushed-forward tables.  Setting r2 = mu = 0
    leaves the planar layer equations in (x2, z2).
    """
    x2, y2, z2, r2, mu = (Poly.var(i, 5) for i in range(5))
    f2 = _push_chart2(system.F, "F")
    g2 = _push_chart2(system.G, "G")
    h2 = _push_chart2(system.H, "H")
    fx = y2 - z2 - mu * z2 + r2 * f2
    fy = 0.5 * mu + r2 * (system.a1 * y2 + system.a2 * z2) + r2 * r2 * g2
    fz = x2 + z2 * z2 + r2 * z2 * h2
    return [fx, fy, fz]


def chart1_field_polys(system):
    """Symbolic desingularized field of the entry chart.

    Returns four `Poly` over CHART1_VARS = (eps1, r1, y1, z1, mu).  With
    B = y1 - (mu+1) z1 + r1 F1 the equations are

        deps1/dt1 = eps1^2 B
        dr1/dt1   = -(1/2) r1 eps1 B
        dy1/dt1   = eps1 (mu/2 + r1 G1) + (1/2) eps1 y1 B
        dz1/dt1   = -1 + z1^2 + r1 z1 H1 + (1/2) eps1 z1 B

    where F1 = F/r1^2, H1 = H/r1^2 and G1 = (a1 y + a2 z + G)/r1 in chart
    coordinates, all exact polynomial divisions.
    """
    eps1, r1, y1, z1, mu = (Poly.var(i, 5) for i in range(5))
    f1 = _push_chart1(system.F, "F", 2)
    h1 = _push_chart1(system.H, "H", 2)
    g1 = system.a1 * y1 + system.a2 * z1 + _push_chart1(system.G, "G", 1)
    b = y1 - z1 - mu * z1 + r1 * f1
    fe = eps1 * eps1 * b
    fr = -0.5 * (r1 * eps1 * b)
    fy = eps1 * (0.5 * mu + r1 * g1) + 0.5 * (eps1 * y1 * b)
    fz = Poly.const(-1.0, 5) + z1 * z1 + r1 * z1 * h1 + 0.5 * (eps1 * z1 * b)
    return [fe, fr, fy, fz]


def chart2_field(system, r2, mu):
    """Chart-2 field as a 3-state `PolyField` at fixed r2 and mu."""
    polys = [
        p.subs_num(3, r2).subs_num(4, mu).restrict((0, 1, 2))
        for p in chart2_field_polys(system)
    ]
    return PolyField(polys)


def chart1_field(system, mu):
    """Chart-1 field as a 4-state `PolyField` at fixed mu."""
    polys = [
        p.subs_num(4, mu).restrict((0, 1, 2, 3))
        for p in chart1_field_polys(system)
    ]
    return PolyField(polys)


def field_chart2(system, p, mu):
    """Desingularized chart-2 velocity (dx2, dy2, dz2) at a point."""
    point = (p.x2, p.y2, p.z2, p.r2, mu)
    return np.array([q(point) for q in chart2_field_polys(system)])


def field_chart1(system, p, mu):
    """Desingularized chart-1 velocity (deps1, dr1, dy1, dz1) at a point."""
    point = (p.eps1, p.r1, p.y1, p.z1, mu)
    return np.array([q(point) for q in chart1_field_polys(system)])
