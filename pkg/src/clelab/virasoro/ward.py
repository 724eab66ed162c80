"""Exact stress-tensor correlators on the sphere.

A :class:`RationalCorrelator` is ``N(c, w) / prod_{i<j} (w_i - w_j)^{d_ij}``
with ``N`` a polynomial; variable 0 of ``N`` is ``c`` and variable ``i`` is
``w_i``. The Ward recursion never leaves this class, so every operation works
directly on the numerator and the exponent table.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import comb
from itertools import permutations

from .poly import Poly

_SUB = str.maketrans("0123456789", "₀₁₂₃₄₅₆₇₈₉")


class RationalCorrelator:
    __slots__ = ("num", "den", "n")

    def __init__(self, num: Poly, den: dict | None = None):
        self.num = num
        self.n = num.nvars - 1
        self.den = {}
        for (i, j), d in (den or {}).items():
            if not 1 <= i <= self.n or not 1 <= j <= self.n or i == j:
                raise ValueError(f"bad pair {(i, j)}")
            if d < 0:
                raise ValueError("denominator exponents must be non-negative")
            if d:
                if i > j:
                    i, j = j, i
                    if d % 2:
                        num = -num
                        self.num = num
                self.den[(i, j)] = self.den.get((i, j), 0) + d

    # construction ---------------------------------------------------------
    @classmethod
    def constant(cls, value, n: int) -> "RationalCorrelator":
        return cls(Poly.const(value, n + 1))

    @classmethod
    def c_times(cls, value, n: int) -> "RationalCorrelator":
        return cls(Poly.var(0, n + 1) * value)

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def _den_poly(self, extra: dict) -> Poly:
        out = Poly.const(1, self.num.nvars)
        for (i, j), d in extra.items():
            if d:
                out = out * Poly.difference_power(i, j, d, self.num.nvars)
        return out

    def _to_den(self, den: dict) -> Poly:
        extra = {p: den.get(p, 0) - self.den.get(p, 0) for p in den}
        return self.num * self._den_poly(extra)

    # arithmetic -----------------------------------------------------------
    def __add__(self, other: "RationalCorrelator") -> "RationalCorrelator":
        if self.n != other.n:
            raise ValueError("correlators live on different point counts")
        den = dict(self.den)
        for p, d in other.den.items():
            den[p] = max(den.get(p, 0), d)
        return _make(self._to_den(den) + other._to_den(den), den).reduced()

    def __neg__(self):
        return _make(-self.num, dict(self.den))

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar):
        if isinstance(scalar, RationalCorrelator):
            den = dict(self.den)
            for p, d in scalar.den.items():
                den[p] = den.get(p, 0) + d
            return _make(self.num * scalar.num, den).reduced()
        if isinstance(scalar, Poly):
            if scalar.nvars != self.num.nvars:
                raise ValueError("scalar polynomial has the wrong variable count")
        return _make(self.num * scalar, dict(self.den))

    __rmul__ = __mul__

    def over_difference(self, i: int, j: int, power: int) -> "RationalCorrelator":
        """Multiply by ``(w_i - w_j)^{-power}``."""
        num = self.num
        if i > j:
            i, j = j, i
            if power % 2:
                num = -num
        den = dict(self.den)
        den[(i, j)] = den.get((i, j), 0) + power
        return _make(num, den)

    def diff(self, k: int) -> "RationalCorrelator":
        """Partial derivative in ``w_k``."""
        nv = self.num.nvars
        pairs = [p for p, d in self.den.items() if d and k in p]
        lin = {p: Poly.difference_power(p[0], p[1], 1, nv) for p in pairs}
        full = Poly.const(1, nv)
        for p in pairs:
            full = full * lin[p]
        out = self.num.diff(k) * full
        for p in pairs:
            rest = Poly.const(1, nv)
            for q in pairs:
                if q != p:
                    rest = rest * lin[q]
            sign = 1 if p[0] == k else -1
            out = out - self.num * rest * (sign * self.den[p])
        den = dict(self.den)
        for p in pairs:
            den[p] += 1
        return _make(out, den).reduced()

    def reduced(self) -> "RationalCorrelator":
        """Cancel every ``(w_i - w_j)`` factor shared with the numerator."""
        if self.num.is_zero():
            return _make(self.num, {})
        num, den = self.num, {}
        for (i, j), d in sorted(self.den.items()):
            while d and num.identify(i, j).is_zero():
                num = num.divide_difference(i, j)
                d -= 1
            if d:
                den[(i, j)] = d
        return _make(num, den)

    def permute(self, perm: dict[int, int]) -> "RationalCorrelator":
        """Relabel ``w_k -> w_{perm[k]}`` for k = 1..n."""
        full = [0] + [perm.get(k, k) for k in range(1, self.n + 1)]
        num = self.num.permute(full)
        den = {}
        for (i, j), d in self.den.items():
            a, b = full[i], full[j]
            if a > b:
                a, b = b, a
                if d % 2:
                    num = -num
            den[(a, b)] = d
        return _make(num, den)

    def __eq__(self, other):
        if not isinstance(other, RationalCorrelator) or self.n != other.n:
            return NotImplemented
        den = dict(self.den)
        for p, d in other.den.items():
            den[p] = max(den.get(p, 0), d)
        return self._to_den(den) == other._to_den(den)

    def __hash__(self):
        r = self.reduced()
        return hash((r.num, frozenset(r.den.items())))

    def degree(self) -> int:
        """Scaling degree in the w's (c has weight zero); None if inhomogeneous."""
        degs = {sum(e[1:]) for e in self.num.terms}
        if len(degs) > 1:
            return None
        base = degs.pop() if degs else 0
        return base - sum(self.den.values())

    def evaluate(self, c, w) -> complex:
        """Numeric value at central charge ``c`` and points ``w_1..w_n``."""
        w = list(w)
        if len(w) != self.n:
            raise ValueError(f"expected {self.n} points, got {len(w)}")
        vals = [c] + w
        den = 1.0 + 0j
        for (i, j), d in self.den.items():
            den *= (w[i - 1] - w[j - 1]) ** d
        return self.num.evaluate_gaussian(vals) / den

    def evaluate_exact(self, c, w) -> Fraction:
        vals = [c] + list(w)
        den = Fraction(1)
        for (i, j), d in self.den.items():
            diff = Fraction(w[i - 1]) - Fraction(w[j - 1])
            if not diff:
                raise ZeroDivisionError(f"w{i} = w{j} is a pole")
            den *= diff ** d
        return self.num.evaluate_exact(vals) / den

    # display --------------------------------------------------------------
    def canonical(self, unicode: bool = False) -> str:
        r = self.reduced()
        names = ["c"] + [f"w{k}" for k in range(1, self.n + 1)]
        num = r.num.format(names)
        if not r.den:
            return num
        if len(r.num.terms) > 1 or "/" in num:
            num = f"({num})"
        facs = []
        for (i, j), d in sorted(r.den.items()):
            f = f"(w{i}-w{j})"
            facs.append(f + (f"^{d}" if d > 1 else ""))
        den = facs[0] if len(facs) == 1 else "(" + "*".join(facs) + ")"
        out = f"{num}/{den}"
        if unicode:
            out = out.replace("-", "−")
            out = "".join(ch.translate(_SUB) if prev == "w" else ch
                          for prev, ch in zip(" " + out, out))
        return out

    def __str__(self):
        return self.canonical()

    __repr__ = __str__


def _make(num: Poly, den: dict) -> RationalCorrelator:
    r = RationalCorrelator.__new__(RationalCorrelator)
    r.num = num
    r.n = num.nvars - 1
    r.den = {p: d for p, d in den.items() if d}
    return r


@lru_cache(maxsize=None)
def _ward(n: int, labels: tuple[int, ...]) -> RationalCorrelator:
    if not labels:
        return RationalCorrelator.constant(1, n)
    if len(labels) == 1:
        return RationalCorrelator.constant(0, n)
    first, rest = labels[0], labels[1:]
    out = RationalCorrelator.constant(0, n)
    half_c = Poly.var(0, n + 1) * Fraction(1, 2)
    without_first = _ward(n, rest)
    for j in rest:
        others = tuple(k for k in rest if k != j)
        inner = _ward(n, others)
        if not inner.is_zero():
            out = out + (inner * half_c).over_difference(first, j, 4)
        if not without_first.is_zero():
            out = out + (without_first * 2).over_difference(first, j, 2)
            out = out + without_first.diff(j).over_difference(first, j, 1)
    return out.reduced()


def ward_npoint(n: int) -> RationalCorrelator:
    """``<T(w_1) ... T(w_n)>`` on the sphere via the conformal Ward recursion."""
    if n < 1:
        raise ValueError("need at least one insertion")
    return _ward(n, tuple(range(1, n + 1)))


def ward_subset(n: int, labels) -> RationalCorrelator:
    """Correlator of the insertions in ``labels``, in the n-point variable space."""
    return _ward(n, tuple(sorted(labels)))


def is_symmetric(corr: RationalCorrelator) -> bool:
    """Exact invariance under every permutation of the insertion points."""
    idx = list(range(1, corr.n + 1))
    for perm in permutations(idx):
        if corr.permute(dict(zip(idx, perm))) != corr:
            return False
    return True


def ope_expand(corr: RationalCorrelator, about: tuple[int, int], order: int = 0
               ) -> dict[int, RationalCorrelator]:
    """Laurent coefficients in ``x = w_i - w_j`` up to and including ``x**order``.

    The coefficients are correlators in the remaining points (``w_i`` no
    longer appears).
    """
    i, j = about
    n = corr.n
    if not (1 <= i <= n and 1 <= j <= n) or i == j:
        raise ValueError(f"invalid pair {about} for {n} points")
    nv = n + 1
    num = corr.num
    # leading pole from the (i, j) factor, with its sign if stored as (j, i)
    lead = 0
    others: list[tuple[int, int, int]] = []      # (k, exponent, sign)
    for (a, b), d in corr.den.items():
        if {a, b} == {i, j}:
            lead = d
            if a == j and d % 2:
                num = -num
        elif i in (a, b):
            k = b if a == i else a
            sign = 1 if a == i else -1
            others.append((k, d, sign))
    rest_den = {p: d for p, d in corr.den.items() if i not in p}
    top = order + lead
    if top < 0:
        return {}
    # series of the numerator after w_i = w_j + x
    series: dict[int, RationalCorrelator] = {
        r: _make(p, dict(rest_den)) for r, p in num.shift_expand(i, j).items() if r <= top}
    for k, d, sign in others:
        # (sign (w_j - w_k + x))^{-d} = sign^d sum_r C(-d, r) x^r (w_j - w_k)^{-d-r}
        factor: dict[int, RationalCorrelator] = {}
        for r in range(top + 1):
            coef = comb(d + r - 1, r) * (-1) ** r * sign ** d
            factor[r] = RationalCorrelator.constant(coef, n).over_difference(j, k, d + r)
        series = _series_mul(series, factor, top)
    return {r - lead: v.reduced() for r, v in sorted(series.items()) if not v.is_zero()}


def _series_mul(a: dict, b: dict, top: int) -> dict:
    out: dict = {}
    for r, x in a.items():
        for s, y in b.items():
            if r + s > top:
                continue
            t = x * y
            out[r + s] = out[r + s] + t if r + s in out else t
    return out
