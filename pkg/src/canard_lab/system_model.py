"""Slow-fast normal form near a folded saddle-node of type II.

The fast-time equations are

    dx/dt = eps * (y - (mu+1) z + F(x, y, z, eps, mu))
    dy/dt = eps * (mu/2 + a1 y + a2 z + G(x, y, z, eps, mu))
    dz/dt = x + z^2 + z H(x, y, z, eps, mu)

with F, G, H finite monomial tables subject to order conditions that pin
the leading geometry: F has no constant or linear (y, z, mu-only) part,
G is the remainder beyond its explicit linear part a1 y + a2 z, and H
vanishes to the orders that keep the critical manifold a parabola at
leading order. The conditions also make every blowup-chart division by a
power of the radius exact at the monomial level, which the chart modules
rely on.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .numerics import PolyField, SystemValidationError, newton_solve
from .polyops import Poly

__all__ = [
    "VAR_NAMES",
    "MonomialTable",
    "SlowFastSystem",
    "FoldedSingularity",
]

# Ambient variable order used by every monomial table.
VAR_NAMES = ("x", "y", "z", "eps", "mu")
_IX, _IY, _IZ, _IE, _IM = range(5)


def _f_condition(e):
    i, j, k, l, _m = e
    return i >= 1 or l >= 1 or j + k >= 2


def _h_condition(e):
    i, j, k, l, _m = e
    return (i >= 1 and k >= 1) or (i >= 1 and j >= 1) or k >= 2 or l >= 1


_CONDITIONS = {
    "F": (_f_condition, "needs x, eps, or total degree >= 2 in (y, z)"),
    "G": (_f_condition, "needs x, eps, or total degree >= 2 in (y, z); "
                        "linear y/z belongs in a1/a2"),
    "H": (_h_condition, "needs x*z, x*y, z^2, or eps as a factor"),
}


class MonomialTable:
    """Finite monomial table c * x^i y^j z^k eps^l mu^m."""

    def __init__(self, entries=None):
        self.coeffs = {}
        if entries:
            items = entries.items() if isinstance(entries, dict) else entries
            for expt, coeff in items:
                key = tuple(int(e) for e in expt)
                if len(key) != 5 or any(e < 0 for e in key):
                    raise SystemValidationError(
                        f"bad exponent tuple {expt!r}: need 5 nonnegative ints"
                    )
                if coeff != 0.0:
                    self.coeffs[key] = self.coeffs.get(key, 0.0) + float(coeff)

    @classmethod
    def from_entries(cls, entries):
        """Parse the JSON form: [{"vars": {"x": 1, ...}, "coeff": c}, ...]."""
        table = cls()
        for entry in entries:
            try:
                var_map = entry["vars"]
                coeff = float(entry["coeff"])
            except (KeyError, TypeError, ValueError) as exc:
                raise SystemValidationError(
                    f"bad monomial entry {entry!r}: need 'vars' and 'coeff'"
                ) from exc
            unknown = set(var_map) - set(VAR_NAMES)
            if unknown:
                raise SystemValidationError(
                    f"unknown variables {sorted(unknown)} in {entry!r}"
                )
            key = tuple(int(var_map.get(name, 0)) for name in VAR_NAMES)
            if coeff != 0.0:
                table.coeffs[key] = table.coeffs.get(key, 0.0) + coeff
        return table

    def to_entries(self):
        out = []
        for expt in sorted(self.coeffs):
            var_map = {
                name: e for name, e in zip(VAR_NAMES, expt) if e
            }
            out.append({"vars": var_map, "coeff": self.coeffs[expt]})
        return out

    @property
    def poly(self):
        return Poly(5, self.coeffs)

    def validate(self, role):
        predicate, hint = _CONDITIONS[role]
        for expt in sorted(self.coeffs):
            if not predicate(expt):
                mono = "*".join(
                    f"{name}^{e}" if e > 1 else name
                    for name, e in zip(VAR_NAMES, expt)
                    if e
                ) or "1"
                raise SystemValidationError(
                    f"{role} table: monomial {mono} violates the order "
                    f"condition ({hint})"
                )

    def __eq__(self, other):
        return isinstance(other, MonomialTable) and self.coeffs == other.coeffs

    def __repr__(self):
        return f"MonomialTable({len(self.coeffs)} terms)"


@dataclass(frozen=True)
class FoldedSingularity:
    point: np.ndarray
    jacobian: np.ndarray
    eigenvalues: np.ndarray
    kind: str


@dataclass
class SlowFastSystem:
    """A concrete system: linear slow coefficients plus monomial tables."""

    a1: float
    a2: float
    F: MonomialTable = field(default_factory=MonomialTable)
    G: MonomialTable = field(default_factory=MonomialTable)
    H: MonomialTable = field(default_factory=MonomialTable)

    def __post_init__(self):
        self.a1 = float(self.a1)
        self.a2 = float(self.a2)
        self.F.validate("F")
        self.G.validate("G")
        self.H.validate("H")
        if abs(self.lam) < 1e-8:
            warnings.warn(
                "a1 + a2 is numerically zero: the branch machinery assumes "
                "a nonzero linear slow divergence",
                stacklevel=2,
            )

    @property
    def lam(self):
        """The slow linear coefficient a1 + a2 (must be nonzero)."""
        return self.a1 + self.a2

    @classmethod
    def canonical(cls, a1=0.0, a2=1.0):
        """Bare normal form with empty tables."""
        return cls(a1=a1, a2=a2)

    # -- configuration -------------------------------------------------

    @classmethod
    def from_config(cls, config):
        if not isinstance(config, dict):
            raise SystemValidationError("config must be a JSON object")
        extra = set(config) - {"a1", "a2", "F", "G", "H"}
        if extra:
            raise SystemValidationError(f"unknown config keys {sorted(extra)}")
        try:
            a1 = float(config["a1"])
            a2 = float(config["a2"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SystemValidationError("config needs numeric a1 and a2") from exc
        tables = {}
        for name in ("F", "G", "H"):
            tables[name] = MonomialTable.from_entries(config.get(name, []))
        return cls(a1=a1, a2=a2, **tables)

    @classmethod
    def from_json(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            try:
                config = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SystemValidationError(f"invalid JSON in {path}: {exc}") from exc
        return cls.from_config(config)

    def to_config(self):
        return {
            "a1": self.a1,
            "a2": self.a2,
            "F": self.F.to_entries(),
            "G": self.G.to_entries(),
            "H": self.H.to_entries(),
        }

    # -- ambient fast system --------------------------------------------

    def fast_field_polys(self):
        """The three ambient components as Polys over (x, y, z, eps, mu)."""
        x = Poly.var(_IX, 5)
        y = Poly.var(_IY, 5)
        z = Poly.var(_IZ, 5)
        e = Poly.var(_IE, 5)
        mu = Poly.var(_IM, 5)
        fx = e * (y - z - mu * z + self.F.poly)
        fy = e * (0.5 * mu + self.a1 * y + self.a2 * z + self.G.poly)
        fz = x + z * z + z * self.H.poly
        return fx, fy, fz

    def fast_field(self, eps, mu):
        """PolyField over (x, y, z) at fixed eps and mu."""
        polys = []
        for p in self.fast_field_polys():
            q = p.subs_num(_IE, eps).subs_num(_IM, mu).restrict([_IX, _IY, _IZ])
            polys.append(q)
        return PolyField(polys)

    # -- critical manifold and reduced flow ------------------------------

    def _v_poly(self, mu):
        """V(x, y, z) = x + z^2 + z H(x, y, z, 0, mu) over (x, y, z)."""
        x = Poly.var(_IX, 5)
        z = Poly.var(_IZ, 5)
        v = x + z * z + z * self.H.poly.subs_num(_IE, 0.0)
        return v.subs_num(_IM, mu).restrict([_IX, _IY, _IZ])

    def critical_manifold_x(self, y, z, mu=0.0):
        """Solve V(x, y, z) = 0 for x near the parabola branch x = -z^2."""
        v = self._v_poly(mu)
        vx = v.deriv(0)

        def scalar(xv):
            return np.array([v((xv[0], y, z))])

        x0 = np.array([-float(z) ** 2])
        if not self.H.coeffs:
            return float(x0[0])
        sol, _info = newton_solve(scalar, x0)
        # Polish with one exact-derivative step.
        xv = float(sol[0])
        fv = v((xv, y, z))
        dv = vx((xv, y, z))
        if dv != 0.0:
            xv -= fv / dv
        return xv

    def reduced_field(self, mu):
        """Exact desingularized reduced field on the critical manifold.

        Returns f(yz) -> (y', z') where, with V = x + z^2 + z H and all
        quantities evaluated on x = m(y, z):

            y' = -V_z * (mu/2 + a1 y + a2 z + G)
            z' =  V_x * (y - (mu+1) z + F) + V_y * (mu/2 + a1 y + a2 z + G)

        This is the fold-desingularized slow flow; the time orientation is
        reversed where V_z > 0.
        """
        h_poly = self.H.poly.subs_num(_IE, 0.0).subs_num(_IM, mu).restrict(
            [_IX, _IY, _IZ]
        )
        f_poly = self.F.poly.subs_num(_IE, 0.0).subs_num(_IM, mu).restrict(
            [_IX, _IY, _IZ]
        )
        g_poly = self.G.poly.subs_num(_IE, 0.0).subs_num(_IM, mu).restrict(
            [_IX, _IY, _IZ]
        )
        hx = h_poly.deriv(0)
        hy = h_poly.deriv(1)
        hz = h_poly.deriv(2)

        def f(yz):
            y, z = float(yz[0]), float(yz[1])
            x = self.critical_manifold_x(y, z, mu)
            p = (x, y, z)
            hval = h_poly(p)
            vx = 1.0 + z * hx(p)
            vy = z * hy(p)
            vz = 2.0 * z + hval + z * hz(p)
            slow = 0.5 * mu + self.a1 * y + self.a2 * z + g_poly(p)
            drift = y - (mu + 1.0) * z + f_poly(p)
            return np.array([-vz * slow, vx * drift + vy * slow])

        return f

    def folded_singularity(self, mu):
        """Equilibrium of the desingularized reduced field on the fold."""
        f = self.reduced_field(mu)
        sol, _info = newton_solve(f, np.zeros(2))
        return sol

    def classify_folded_singularity(self, mu, degeneracy_tol=1e-9):
        """Eigenvalue classification of the folded singularity."""
        f = self.reduced_field(mu)
        point = self.folded_singularity(mu)
        step = 1e-6
        jac = np.empty((2, 2))
        for j in range(2):
            dp = np.zeros(2)
            dp[j] = step
            jac[:, j] = (f(point + dp) - f(point - dp)) / (2 * step)
        eigs = np.linalg.eigvals(jac)
        if np.max(np.abs(eigs.imag)) > degeneracy_tol:
            kind = "focus"
        else:
            re = np.sort(eigs.real)
            if np.min(np.abs(re)) <= degeneracy_tol:
                kind = "saddle-node"
            elif re[0] * re[1] < 0:
                kind = "saddle"
            else:
                kind = "node"
        return FoldedSingularity(point=point, jacobian=jac,
                                 eigenvalues=eigs, kind=kind)
