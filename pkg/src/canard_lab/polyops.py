"""Sparse multivariate polynomials and truncated power series helpers.

Everything downstream (chart vector fields, slow-manifold series, the
Melnikov construction) is assembled from exact monomial-level operations:
coefficients are floats, exponents are integers, and structural divisions
(by a blowup radius or by the amplitude variable) subtract exponents
instead of dividing numbers, so they are exact whenever they are legal.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Poly",
    "ser_add",
    "ser_mul",
    "ser_scale",
    "ser_diff",
    "ser_eval",
    "ser_compose_affine",
    "poly_on_series",
    "s2_add",
    "s2_mul",
    "s2_scale",
    "poly_on_series2",
]


class Poly:
    """Sparse polynomial in ``nvars`` variables with float coefficients.

    Terms are stored as a dict mapping exponent tuples to coefficients.
    Exact zeros produced by cancellation are pruned eagerly so that
    structural identities (e.g. subtracting a polynomial from itself)
    leave no stale monomials behind.
    """

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars, terms=None):
        self.nvars = int(nvars)
        self.terms = {}
        if terms:
            for expt, coeff in terms.items() if isinstance(terms, dict) else terms:
                if coeff != 0.0:
                    key = tuple(int(e) for e in expt)
                    if len(key) != self.nvars:
                        raise ValueError("exponent tuple length mismatch")
                    self.terms[key] = self.terms.get(key, 0.0) + float(coeff)
            self._prune()

    # -- constructors -------------------------------------------------

    @classmethod
    def zero(cls, nvars):
        return cls(nvars)

    @classmethod
    def const(cls, value, nvars):
        p = cls(nvars)
        if value != 0.0:
            p.terms[(0,) * nvars] = float(value)
        return p

    @classmethod
    def var(cls, index, nvars):
        if not 0 <= index < nvars:
            raise ValueError("variable index out of range")
        p = cls(nvars)
        expt = [0] * nvars
        expt[index] = 1
        p.terms[tuple(expt)] = 1.0
        return p

    @classmethod
    def monomial(cls, coeff, expt):
        p = cls(len(expt))
        if coeff != 0.0:
            p.terms[tuple(int(e) for e in expt)] = float(coeff)
        return p

    # -- bookkeeping ---------------------------------------------------

    def _prune(self):
        dead = [k for k, c in self.terms.items() if c == 0.0]
        for k in dead:
            del self.terms[k]
        return self

    def copy(self):
        p = Poly(self.nvars)
        p.terms = dict(self.terms)
        return p

    def __len__(self):
        return len(self.terms)

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        if not isinstance(other, Poly):
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def __repr__(self):
        if not self.terms:
            return "Poly(0)"
        bits = []
        for expt in sorted(self.terms):
            mono = "*".join(
                f"x{i}^{e}" if e > 1 else f"x{i}"
                for i, e in enumerate(expt)
                if e
            )
            c = self.terms[expt]
            bits.append(f"{c:+g}" + (f"*{mono}" if mono else ""))
        return "Poly(" + " ".join(bits) + ")"

    def max_degree(self, index):
        return max((e[index] for e in self.terms), default=0)

    def total_degree(self):
        return max((sum(e) for e in self.terms), default=0)

    # -- arithmetic ----------------------------------------------------

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Poly.const(other, self.nvars)
        if not isinstance(other, Poly):
            return NotImplemented
        if other.nvars != self.nvars:
            raise ValueError("nvars mismatch")
        out = self.copy()
        for expt, coeff in other.terms.items():
            out.terms[expt] = out.terms.get(expt, 0.0) + coeff
        return out._prune()

    __radd__ = __add__

    def __neg__(self):
        out = Poly(self.nvars)
        out.terms = {e: -c for e, c in self.terms.items()}
        return out

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = Poly.const(other, self.nvars)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            out = Poly(self.nvars)
            if other != 0.0:
                out.terms = {e: c * other for e, c in self.terms.items()}
            return out
        if not isinstance(other, Poly):
            return NotImplemented
        if other.nvars != self.nvars:
            raise ValueError("nvars mismatch")
        out = Poly(self.nvars)
        acc = out.terms
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                key = tuple(a + b for a, b in zip(e1, e2))
                acc[key] = acc.get(key, 0.0) + c1 * c2
        return out._prune()

    __rmul__ = __mul__

    def __pow__(self, n):
        if n < 0 or n != int(n):
            raise ValueError("only nonnegative integer powers")
        out = Poly.const(1.0, self.nvars)
        base = self
        n = int(n)
        while n:
            if n & 1:
                out = out * base
            base = base * base if n > 1 else base
            n >>= 1
        return out

    def deriv(self, index):
        out = Poly(self.nvars)
        for expt, coeff in self.terms.items():
            e = expt[index]
            if e:
                key = expt[:index] + (e - 1,) + expt[index + 1 :]
                out.terms[key] = out.terms.get(key, 0.0) + coeff * e
        return out._prune()

    # -- substitution and evaluation ------------------------------------

    def subs_num(self, index, value):
        """Substitute a number for one variable (exponent folded away)."""
        out = Poly(self.nvars)
        value = float(value)
        for expt, coeff in self.terms.items():
            e = expt[index]
            c = coeff * (value**e if e else 1.0)
            if c != 0.0:
                key = expt[:index] + (0,) + expt[index + 1 :]
                out.terms[key] = out.terms.get(key, 0.0) + c
        return out._prune()

    def divide_by_var(self, index, power=1):
        """Exact division by ``x_index**power`` (raises if not a factor)."""
        out = Poly(self.nvars)
        for expt, coeff in self.terms.items():
            if expt[index] < power:
                raise ValueError(
                    f"monomial {expt} is not divisible by variable {index}^{power}"
                )
            key = expt[:index] + (expt[index] - power,) + expt[index + 1 :]
            out.terms[key] = coeff
        return out

    def mul_var(self, index, power=1):
        out = Poly(self.nvars)
        for expt, coeff in self.terms.items():
            key = expt[:index] + (expt[index] + power,) + expt[index + 1 :]
            out.terms[key] = coeff
        return out

    def embed(self, nvars, positions):
        """Re-index into a larger variable space.

        ``positions[i]`` is the index in the new space of the old variable i.
        """
        if len(positions) != self.nvars:
            raise ValueError("positions length mismatch")
        out = Poly(nvars)
        for expt, coeff in self.terms.items():
            key = [0] * nvars
            for old, new in enumerate(positions):
                key[new] = expt[old]
            out.terms[tuple(key)] = coeff
        return out

    def compose(self, targets):
        """Substitute ``targets[i]`` (a Poly) for each variable i.

        All targets must share a common nvars, which becomes the output's.
        """
        if len(targets) != self.nvars:
            raise ValueError("need one target per variable")
        out_nvars = targets[0].nvars
        if any(t.nvars != out_nvars for t in targets):
            raise ValueError("targets must share nvars")
        # Cache powers of each target as needed.
        pow_cache = [{0: Poly.const(1.0, out_nvars)} for _ in targets]

        def powered(i, e):
            cache = pow_cache[i]
            if e not in cache:
                cache[e] = powered(i, e - 1) * targets[i]
            return cache[e]

        out = Poly.zero(out_nvars)
        for expt, coeff in self.terms.items():
            term = Poly.const(coeff, out_nvars)
            for i, e in enumerate(expt):
                if e:
                    term = term * powered(i, e)
            out = out + term
        return out

    def restrict(self, keep):
        """Project onto the variables ``keep`` (in the given order).

        All other variables must appear with exponent zero (substitute
        them numerically first).
        """
        keep = list(keep)
        dropped = [i for i in range(self.nvars) if i not in keep]
        out = Poly(len(keep))
        for expt, coeff in self.terms.items():
            for i in dropped:
                if expt[i]:
                    raise ValueError(
                        f"variable {i} still present with exponent {expt[i]}"
                    )
            out.terms[tuple(expt[i] for i in keep)] = coeff
        return out

    def coeff_of(self, index, power):
        """Polynomial coefficient of ``x_index**power`` (variable removed
        from the exponent, nvars unchanged)."""
        out = Poly(self.nvars)
        for expt, coeff in self.terms.items():
            if expt[index] == power:
                key = expt[:index] + (0,) + expt[index + 1 :]
                out.terms[key] = coeff
        return out

    def __call__(self, point):
        point = np.asarray(point, dtype=float)
        total = 0.0
        for expt, coeff in self.terms.items():
            v = coeff
            for x, e in zip(point, expt):
                if e:
                    v *= x**e
            total += v
        return total

    def eval_many(self, points):
        """Evaluate at an (m, nvars) array of points, returning (m,)."""
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[None, :]
        out = np.zeros(points.shape[0])
        for expt, coeff in self.terms.items():
            v = np.full(points.shape[0], coeff)
            for i, e in enumerate(expt):
                if e:
                    v = v * points[:, i] ** e
            out += v
        return out

    def arrays(self):
        """(coeffs, exponent matrix) in a deterministic order."""
        keys = sorted(self.terms)
        coeffs = np.array([self.terms[k] for k in keys], dtype=float)
        expts = np.array(keys, dtype=np.int64).reshape(len(keys), self.nvars)
        return coeffs, expts


# ---------------------------------------------------------------------
# Dense truncated series in one variable (numpy coefficient arrays,
# ascending order). Used by the slow-manifold fixed point.
# ---------------------------------------------------------------------


def ser_add(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < b.size:
        a, b = b, a
    out = a.copy()
    out[: b.size] += b
    return out


def ser_mul(a, b, n):
    """Product truncated to length ``n`` (degree n-1)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        return np.zeros(0)
    return np.convolve(a, b)[:n]


def ser_scale(a, c):
    return np.asarray(a, dtype=float) * c

def ser_diff(a):
    a = np.asarray(a, dtype=float)
    if a.size <= 1:
        return np.zeros(1)
    return a[1:] * np.arange(1, a.size)


def ser_eval(a, x):
    return np.polynomial.polynomial.polyval(x, np.asarray(a, dtype=float))


def ser_compose_affine(p, c0, c1, n):
    """Coefficients of ``p(c0 + c1*v)`` truncated to length n (Horner)."""
    p = np.asarray(p, dtype=float)
    out = np.zeros(1)
    for coeff in p[::-1]:
        out = ser_mul(out, np.array([c0, c1]), n)
        out = ser_add(out, np.array([coeff]))
    return out


def poly_on_series(poly, subs, n):
    """Evaluate a Poly with per-variable dense series or scalars.

    ``subs[i]`` is either a float (constant substitution) or a 1-D
    coefficient array. Returns a series of length <= n.
    """
    pow_cache = [{} for _ in range(poly.nvars)]

    def powered(i, e):
        cache = pow_cache[i]
        if e not in cache:
            if e == 0:
                cache[e] = np.array([1.0])
            else:
                cache[e] = ser_mul(powered(i, e - 1), subs[i], n)
        return cache[e]

    out = np.zeros(1)
    for expt, coeff in poly.terms.items():
        term = np.array([coeff])
        for i, e in enumerate(expt):
            if not e:
                continue
            s = subs[i]
            if np.isscalar(s):
                term = term * float(s) ** e
            else:
                term = ser_mul(term, powered(i, e), n)
        out = ser_add(out, term)
    return out


# ---------------------------------------------------------------------
# Two-level series: truncated in r with polynomial coefficients in a
# second variable. Represented as a list of 1-D arrays (index = r power).
# ---------------------------------------------------------------------


def s2_add(a, b):
    n = max(len(a), len(b))
    out = []
    for k in range(n):
        pa = a[k] if k < len(a) else np.zeros(1)
        pb = b[k] if k < len(b) else np.zeros(1)
        out.append(ser_add(pa, pb))
    return out


def s2_mul(a, b, nr):
    out = [np.zeros(1) for _ in range(nr)]
    for i, pa in enumerate(a):
        if i >= nr:
            break
        for j, pb in enumerate(b):
            k = i + j
            if k >= nr:
                break
            out[k] = ser_add(out[k], np.convolve(pa, pb))
    return out


def s2_scale(a, c):
    return [p * c for p in a]


def poly_on_series2(poly, subs, nr):
    """Evaluate a Poly on two-level series (lists of arrays) or scalars.

    ``subs[i]`` is a float or a list of 1-D arrays. Truncated at r-order
    nr-1; polynomial degrees in the second variable are left free.
    """
    one = [np.array([1.0])]
    pow_cache = [{} for _ in range(poly.nvars)]

    def powered(i, e):
        cache = pow_cache[i]
        if e not in cache:
            if e == 0:
                cache[e] = one
            else:
                cache[e] = s2_mul(powered(i, e - 1), subs[i], nr)
        return cache[e]

    out = [np.zeros(1) for _ in range(nr)]
    for expt, coeff in poly.terms.items():
        term = [np.array([coeff])]
        for i, e in enumerate(expt):
            if not e:
                continue
            s = subs[i]
            if np.isscalar(s):
                term = s2_scale(term, float(s) ** e)
            else:
                term = s2_mul(term, powered(i, e), nr)
        out = s2_add(out, term)
    return [p if isinstance(p, np.ndarray) else np.asarray(p) for p in out[:nr]]
