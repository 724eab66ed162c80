"""Virasoro modes acting on the vacuum module.

States are stored in the PBW basis ``L_{-k1} L_{-k2} ... L_{-kr} |0>`` with
``k1 >= k2 >= ... >= 2``; the key of a basis vector is the partition
``(k1, ..., kr)``. Coefficients are polynomials in ``c``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from .poly import C, Poly, cpoly

Partition = tuple[int, ...]


def central_term(n: int, m: int) -> Poly:
    """``(c/12)(n^3 - n) delta_{n+m,0}``."""
    if n + m != 0:
        return Poly.zero(1)
    return C * Fraction(n ** 3 - n, 12)


def _add_into(acc: dict, key, coeff: Poly) -> None:
    s = acc.get(key)
    s = coeff if s is None else s + coeff
    if s:
        acc[key] = s
    else:
        acc.pop(key, None)


@lru_cache(maxsize=None)
def _apply_basis(n: int, part: Partition) -> tuple[tuple[Partition, Poly], ...]:
    """``L_n`` on one basis vector, returned as canonical ``(partition, coeff)`` pairs."""
    if not part:
        if n >= -1:
            return ()
        return (((-n,), Poly.const(1)),)
    k1, rest = part[0], part[1:]
    if n < 0 and -n >= k1:
        return (((-n,) + part, Poly.const(1)),)
    # L_n L_{-k1} Y = L_{-k1} L_n Y + (n + k1) L_{n-k1} Y + central * Y
    acc: dict = {}
    for p, a in _apply_basis(n, rest):
        for q, b in _apply_basis(-k1, p):
            _add_into(acc, q, a * b)
    if n + k1:
        for q, b in _apply_basis(n - k1, rest):
            _add_into(acc, q, b * (n + k1))
    cen = central_term(n, -k1)
    if cen:
        _add_into(acc, rest, cen)
    return tuple(sorted(acc.items()))


@dataclass(frozen=True)
class VirMonomial:
    """``coeff * L_{n1} ... L_{nj} |0>``, modes applied right to left."""

    modes: tuple[int, ...]
    coeff: Poly = field(default_factory=lambda: Poly.const(1))

    def __post_init__(self):
        if any(int(n) == 0 for n in self.modes):
            raise ValueError("monomial modes must be nonzero")
        object.__setattr__(self, "modes", tuple(int(n) for n in self.modes))
        object.__setattr__(self, "coeff", cpoly(self.coeff))

    @property
    def level(self) -> int:
        return -sum(self.modes)

    def canonical(self) -> "VirState":
        st = VirState.vacuum()
        for n in reversed(self.modes):
            st = st.apply(n)
        return st * self.coeff


class VirState:
    """A finite combination of PBW basis vectors of the vacuum module."""

    __slots__ = ("terms",)

    def __init__(self, terms: dict | None = None):
        self.terms: dict[Partition, Poly] = {}
        for p, v in (terms or {}).items():
            p = tuple(p)
            if list(p) != sorted(p, reverse=True) or any(k < 2 for k in p):
                raise ValueError(f"{p} is not a vacuum-module basis label")
            v = cpoly(v)
            if v:
                self.terms[p] = v

    @classmethod
    def vacuum(cls) -> "VirState":
        return cls({(): 1})

    @classmethod
    def from_monomials(cls, monomials) -> "VirState":
        out = cls()
        for m in monomials:
            out = out + m.canonical()
        return out

    @classmethod
    def basis(cls, part: Partition) -> "VirState":
        return cls({tuple(part): 1})

    @property
    def level(self) -> int | None:
        levels = {sum(p) for p in self.terms}
        if len(levels) > 1:
            raise ValueError(f"state mixes levels {sorted(levels)}")
        return levels.pop() if levels else None

    def apply(self, n: int) -> "VirState":
        acc: dict = {}
        for p, a in self.terms.items():
            for q, b in _apply_basis(n, p):
                _add_into(acc, q, a * b)
        return _wrap(acc)

    def canonical(self) -> "VirState":
        return self

    def __add__(self, other: "VirState") -> "VirState":
        acc = dict(self.terms)
        for p, v in other.terms.items():
            _add_into(acc, p, v)
        return _wrap(acc)

    def __neg__(self):
        return _wrap({p: -v for p, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar):
        s = cpoly(scalar)
        return _wrap({p: v * s for p, v in self.terms.items() if v * s})

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, VirState) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def coefficient(self, part: Partition) -> Poly:
        return self.terms.get(tuple(part), Poly.zero(1))

    def __str__(self):
        if not self.terms:
            return "0"
        out = []
        for p in sorted(self.terms, key=lambda q: (len(q), tuple(-k for k in q))):
            word = " ".join(f"L{-k}" for k in p) or "1"
            coeff = self.terms[p]
            cs = coeff.format()
            if cs == "1":
                out.append(word if not p else f"{word} 1")
            else:
                out.append(f"({cs}) {word}" + (" 1" if p else ""))
        return " + ".join(out)

    __repr__ = __str__


def _wrap(terms: dict) -> VirState:
    s = VirState.__new__(VirState)
    s.terms = terms
    return s


def vev(modes) -> Poly:
    """``<0| L_{n1} ... L_{nj} |0>`` as a polynomial in c."""
    modes = tuple(int(n) for n in modes)
    if sum(modes) != 0:
        return Poly.zero(1)
    return VirMonomial(modes).canonical().coefficient(())


def partitions(level: int, min_part: int = 2) -> list[Partition]:
    """Partitions of ``level`` into parts >= min_part, largest first part first."""

    def gen(rest, cap):
        if rest == 0:
            yield ()
            return
        for k in range(min(rest, cap), min_part - 1, -1):
            for tail in gen(rest - k, k):
                yield (k,) + tail

    return list(gen(level, level))


def gram_matrix(level: int) -> tuple[list[Partition], list[list[Poly]]]:
    """Shapovalov form on the level subspace, with ``L_n^dagger = L_{-n}``."""
    if level < 0:
        raise ValueError("level must be non-negative")
    if level > 10:
        raise ValueError("level above 10 is not supported")
    basis = partitions(level)
    states = [VirState.basis(p) for p in basis]
    mat = []
    for mu in basis:
        row = []
        for st in states:
            v = st
            # <L_{-mu} 1, v> = <0| L_{mu_r} ... L_{mu_1} v>
            for k in mu:
                v = v.apply(k)
            row.append(v.coefficient(()))
        mat.append(row)
    return basis, mat


def descendant_state(k: int, m: int) -> VirState:
    """Descendant ``T_{k,m}`` for ``m`` in 1..3."""
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if m > 3:
        raise NotImplementedError(
            f"T_{{k,{m}}} needs the general recursion for the partition "
            "coefficients, which is not implemented; only m <= 3 is available")
    a = k - 1
    if m == 1:
        mons = [VirMonomial((-k,))]
    elif m == 2:
        mons = [VirMonomial((-k, -k)), VirMonomial((-2 * k,), Poly.const(a))]
    else:
        mons = [VirMonomial((-k, -k, -k)),
                VirMonomial((-2 * k, -k), Poly.const(3 * a)),
                VirMonomial((-3 * k,), Poly.const(2 * a * (2 * k - 1)))]
    return VirState.from_monomials(mons)


@dataclass(frozen=True)
class RelationReport:
    derivative_constants: dict[int, Fraction]
    derivative_expected: dict[int, Fraction]
    finite_part_holds: bool

    @property
    def derivative_matches_unit(self) -> dict[int, bool]:
        """Whether each constant equals 1, the unnormalized convention."""
        return {k: v == 1 for k, v in self.derivative_constants.items()}


def _proportionality(a: VirState, b: VirState) -> Fraction | None:
    """Constant ``r`` with ``a = r b`` (exact), or None."""
    if not b.terms:
        return None
    p0, v0 = next(iter(b.terms.items()))
    num = a.coefficient(p0)
    if not (num.is_constant() and v0.is_constant()):
        return None
    r = num.constant_term() / v0.constant_term()
    return r if a == b * r else None


def relation_checks(kmax: int = 6) -> RelationReport:
    """Mode-algebra versions of the derivative and finite-part relations.

    ``L_{-1} T_{k,1}`` is compared with ``T_{k+1,1}``; the algebra gives the
    constant ``k - 1``. The finite part of ``T_{2,1} T_{2,1}`` is checked as
    ``T_{2,2} - T_{4,1} = L_{-2}^2 1``.
    """
    consts, expected = {}, {}
    for k in range(2, kmax + 1):
        lhs = descendant_state(k, 1).apply(-1)
        consts[k] = _proportionality(lhs, descendant_state(k + 1, 1))
        expected[k] = Fraction(k - 1)
    fp = descendant_state(2, 2) - descendant_state(4, 1)
    holds = fp == VirState.basis((2, 2))
    return RelationReport(consts, expected, holds)
