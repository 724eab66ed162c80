"""Sparse multivariate polynomials with exact rational coefficients.

Variable 0 is the central charge ``c`` by convention; correlators put the
insertion points ``w1..wn`` in variables 1..n.
"""

from __future__ import annotations

from fractions import Fraction
from math import comb, gcd as _gcd
from numbers import Rational

Scalar = int | Fraction


def _frac(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, Rational)):
        return Fraction(v)
    raise TypeError(f"exact coefficient required, got {type(v).__name__}")


class Poly:
    """Polynomial as ``{exponent tuple: Fraction}`` with zero terms dropped."""

    __slots__ = ("terms", "nvars")

    def __init__(self, terms=None, nvars: int = 1):
        self.nvars = nvars
        self.terms: dict[tuple[int, ...], Fraction] = {}
        if terms:
            for e, v in terms.items():
                if len(e) != nvars:
                    raise ValueError(f"exponent {e} does not have {nvars} entries")
                v = _frac(v)
                if v:
                    self.terms[e] = v

    # construction ---------------------------------------------------------
    @classmethod
    def const(cls, value, nvars: int = 1) -> "Poly":
        return cls({(0,) * nvars: value}, nvars)

    @classmethod
    def var(cls, i: int, nvars: int) -> "Poly":
        e = [0] * nvars
        e[i] = 1
        return cls({tuple(e): 1}, nvars)

    @classmethod
    def zero(cls, nvars: int = 1) -> "Poly":
        return cls(None, nvars)

    @classmethod
    def difference_power(cls, i: int, j: int, k: int, nvars: int) -> "Poly":
        """``(x_i - x_j)**k`` expanded."""
        out = {}
        for r in range(k + 1):
            e = [0] * nvars
            e[i] += k - r
            e[j] += r
            out[tuple(e)] = Fraction((-1) ** r * comb(k, r))
        return cls(out, nvars)

    def _lift(self, other) -> "Poly":
        if isinstance(other, Poly):
            if other.nvars != self.nvars:
                raise ValueError("variable count mismatch")
            return other
        return Poly.const(other, self.nvars)

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        other = self._lift(other)
        out = dict(self.terms)
        for e, v in other.terms.items():
            s = out.get(e, 0) + v
            if s:
                out[e] = s
            else:
                out.pop(e, None)
        return _raw(out, self.nvars)

    __radd__ = __add__

    def __neg__(self):
        return _raw({e: -v for e, v in self.terms.items()}, self.nvars)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, Poly):
            f = _frac(other)
            if not f:
                return Poly.zero(self.nvars)
            return _raw({e: v * f for e, v in self.terms.items()}, self.nvars)
        other = self._lift(other)
        out: dict = {}
        for e1, v1 in self.terms.items():
            for e2, v2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                s = out.get(e, 0) + v1 * v2
                if s:
                    out[e] = s
                else:
                    out.pop(e, None)
        return _raw(out, self.nvars)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * (1 / _frac(other))

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power of a polynomial")
        out = Poly.const(1, self.nvars)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __eq__(self, other):
        if isinstance(other, Poly):
            return self.nvars == other.nvars and self.terms == other.terms
        try:
            return self == Poly.const(other, self.nvars)
        except TypeError:
            return NotImplemented

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def __bool__(self):
        return bool(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(not any(e) for e in self.terms)

    def constant_term(self) -> Fraction:
        return self.terms.get((0,) * self.nvars, Fraction(0))

    # calculus and substitution -------------------------------------------
    def diff(self, i: int) -> "Poly":
        out = {}
        for e, v in self.terms.items():
            if e[i]:
                f = list(e)
                f[i] -= 1
                out[tuple(f)] = v * e[i]
        return _raw(out, self.nvars)

    def degree(self, i: int | None = None) -> int:
        if not self.terms:
            return -1
        if i is None:
            return max(sum(e) for e in self.terms)
        return max(e[i] for e in self.terms)

    def identify(self, i: int, j: int) -> "Poly":
        """Set ``x_i = x_j``."""
        out: dict = {}
        for e, v in self.terms.items():
            f = list(e)
            f[j] += f[i]
            f[i] = 0
            f = tuple(f)
            s = out.get(f, 0) + v
            if s:
                out[f] = s
            else:
                out.pop(f, None)
        return _raw(out, self.nvars)

    def divide_difference(self, i: int, j: int) -> "Poly":
        """Exact quotient by ``(x_i - x_j)``; raises if there is a remainder."""
        by_power: dict[int, Poly] = {}
        for e, v in self.terms.items():
            f = list(e)
            k = f[i]
            f[i] = 0
            by_power.setdefault(k, Poly.zero(self.nvars))
            by_power[k] = by_power[k] + _raw({tuple(f): v}, self.nvars)
        if not by_power:
            return Poly.zero(self.nvars)
        top = max(by_power)
        xj = Poly.var(j, self.nvars)
        xi = Poly.var(i, self.nvars)
        b = Poly.zero(self.nvars)
        q = Poly.zero(self.nvars)
        for k in range(top, 0, -1):
            b = by_power.get(k, Poly.zero(self.nvars)) + xj * b
            q = q + b * (xi ** (k - 1))
        rem = by_power.get(0, Poly.zero(self.nvars)) + xj * b
        if rem:
            raise ValueError(f"not divisible by (x{i} - x{j})")
        return q

    def shift_expand(self, i: int, j: int) -> dict[int, "Poly"]:
        """Substitute ``x_i = x_j + t`` and return the coefficients of ``t**r``."""
        out: dict[int, dict] = {}
        for e, v in self.terms.items():
            k = e[i]
            for r in range(k + 1):
                f = list(e)
                f[i] = 0
                f[j] += k - r
                f = tuple(f)
                d = out.setdefault(r, {})
                s = d.get(f, 0) + v * comb(k, r)
                if s:
                    d[f] = s
                else:
                    d.pop(f, None)
        return {r: _raw(d, self.nvars) for r, d in out.items() if d}

    def permute(self, perm) -> "Poly":
        """Rename variable ``k`` to ``perm[k]``."""
        out = {}
        for e, v in self.terms.items():
            f = [0] * self.nvars
            for k, p in enumerate(e):
                f[perm[k]] = p
            out[tuple(f)] = v
        return _raw(out, self.nvars)

    def evaluate(self, values) -> complex:
        total = 0
        for e, v in self.terms.items():
            t = complex(v)
            for x, p in zip(values, e):
                if p:
                    t *= x ** p
            total += t
        return total

    def evaluate_gaussian(self, values) -> complex:
        """Evaluate at complex floats without cancellation error.

        Every float is an integer times ``2**-K`` for a common ``K``, so the
        whole sum is formed in exact Gaussian-integer arithmetic and only the
        result is rounded.
        """
        if not self.terms:
            return 0j
        parts = []
        for v in values:
            z = complex(v)
            parts.extend((z.real, z.imag))
        K = max((Fraction(t).denominator.bit_length() - 1 for t in parts), default=0)
        scale = 1 << K
        pts = []
        for v in values:
            z = complex(v)
            pts.append((int(Fraction(z.real) * scale), int(Fraction(z.imag) * scale)))
        den = 1
        for v in self.terms.values():
            den = den * v.denominator // _gcd(den, v.denominator)
        top = max(sum(e) for e in self.terms)
        cache: dict = {}

        def power(k, p):
            key = (k, p)
            if key not in cache:
                if p == 0:
                    cache[key] = (1, 0)
                else:
                    a, b = power(k, p - 1)
                    x, y = pts[k]
                    cache[key] = (a * x - b * y, a * y + b * x)
            return cache[key]

        re = im = 0
        for e, v in self.terms.items():
            a, b = v.numerator * (den // v.denominator) << (K * (top - sum(e))), 0
            for k, p in enumerate(e):
                if p:
                    x, y = power(k, p)
                    a, b = a * x - b * y, a * y + b * x
            re += a
            im += b
        norm = den << (K * top)
        return complex(float(Fraction(re, norm)), float(Fraction(im, norm)))

    def evaluate_exact(self, values) -> "Poly | Fraction":
        """Substitute exact rationals for every variable."""
        total = Fraction(0)
        for e, v in self.terms.items():
            t = v
            for x, p in zip(values, e):
                if p:
                    t *= _frac(x) ** p
            total += t
        return total

    # display --------------------------------------------------------------
    def format(self, names=None) -> str:
        if names is None:
            names = ["c"] if self.nvars == 1 else [f"x{k}" for k in range(self.nvars)]
        if not self.terms:
            return "0"
        keys = sorted(self.terms, key=lambda e: (-sum(e), tuple(-p for p in e)))
        parts = []
        for n, e in enumerate(keys):
            v = self.terms[e]
            mono = "*".join(names[k] + (f"^{p}" if p > 1 else "")
                            for k, p in enumerate(e) if p)
            sign = "-" if v < 0 else "+"
            a = abs(v)
            if not mono:
                body = str(a)
            elif a == 1:
                body = mono
            elif a.denominator == 1:
                body = f"{a.numerator}*{mono}"
            else:
                body = f"{a.numerator}/{a.denominator}*{mono}" if a.numerator != 1 \
                    else f"{mono}/{a.denominator}"
            if n == 0:
                parts.append(body if sign == "+" else "-" + body)
            else:
                parts.append(f" {sign} {body}")
        return "".join(parts)

    def __str__(self):
        return self.format()

    def __repr__(self):
        return f"Poly({self.format()!r}, nvars={self.nvars})"


def _raw(terms: dict, nvars: int) -> Poly:
    p = Poly.__new__(Poly)
    p.nvars = nvars
    p.terms = terms
    return p


C = Poly.var(0, 1)
"""The central charge as a one-variable polynomial."""


def cpoly(value) -> Poly:
    """Coerce an exact scalar or a ``c`` polynomial to a one-variable Poly."""
    if isinstance(value, Poly):
        if value.nvars != 1:
            raise ValueError("expected a polynomial in c alone")
        return value
    return Poly.const(value, 1)
