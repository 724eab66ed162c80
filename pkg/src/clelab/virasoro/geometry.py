"""Derivatives along small conformal maps and the Virasoro connection.

``Delta[h] F`` is the complex derivative in ``eta`` of ``F`` evaluated on a
curve pushed forward by ``z -> z + eta h(z)``. Numerical checks use real
central differences (holomorphy in ``eta`` makes the real direction enough);
the connection check is exact, working with formal derivatives of ``log Z``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .algebra import central_term
from .poly import Poly

_MIN_STEP = 1e-7


@dataclass(frozen=True)
class VectorField:
    """Laurent polynomial ``h(z) = sum_p coeffs[p] z**p`` (exact coefficients)."""

    coeffs: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {int(p): Fraction(v) for p, v in self.coeffs.items() if v}
        object.__setattr__(self, "coeffs", clean)

    @classmethod
    def mode(cls, ell: int, scale=1) -> "VectorField":
        """``h_ell(z) = -z**(ell + 1)``."""
        return cls({ell + 1: -Fraction(scale)})

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        for p, v in self.coeffs.items():
            out = out + float(v) * z ** p
        return out

    def derivative(self) -> "VectorField":
        return VectorField({p - 1: v * p for p, v in self.coeffs.items() if p})

    def __add__(self, other):
        out = dict(self.coeffs)
        for p, v in other.coeffs.items():
            out[p] = out.get(p, 0) + v
        return VectorField(out)

    def __mul__(self, other):
        if isinstance(other, VectorField):
            out: dict = {}
            for p, a in self.coeffs.items():
                for q, b in other.coeffs.items():
                    out[p + q] = out.get(p + q, 0) + a * b
            return VectorField(out)
        return VectorField({p: v * Fraction(other) for p, v in self.coeffs.items()})

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1

    def __sub__(self, other):
        return self + (-other)

    def is_zero(self) -> bool:
        return not self.coeffs

    def modes(self) -> dict[int, Fraction]:
        """Coefficients in the basis ``h_ell``."""
        return {p - 1: -v for p, v in self.coeffs.items()}


def witt_bracket(h: VectorField, hp: VectorField) -> VectorField:
    """``h dh' - h' dh``."""
    return h * hp.derivative() - hp * h.derivative()


# --------------------------------------------------------------------------
# numeric derivatives along conformal maps

def _check_step(step: float) -> None:
    if not step > _MIN_STEP:
        raise ValueError(f"step {step} below {_MIN_STEP}; differences would be roundoff")


def delta(h: VectorField, F: Callable, curve, step: float = 1e-4) -> complex:
    """``Delta[h] F`` at ``curve`` by a central difference."""
    _check_step(step)
    z = np.asarray(curve, dtype=complex)
    hz = h(z)
    return (F(z + step * hz) - F(z - step * hz)) / (2 * step)


def witt_commutator_check(h: VectorField, hp: VectorField, F: Callable, curve,
                          step: float = 1e-4) -> float:
    """``|([Delta[h], Delta[h']] - Delta[h dh' - h' dh]) F|`` by nested differences.

    ``Delta[h] Delta[h'] F`` differentiates ``F((id + eta' h') o (id + eta h) curve)``
    in both parameters, so the commutator compares the two composition orders.
    """
    _check_step(step)
    z = np.asarray(curve, dtype=complex)
    signs = (step, -step)

    def mixed(first: VectorField, second: VectorField) -> complex:
        vals = {}
        for a in signs:
            inner = z + a * first(z)
            for b in signs:
                vals[a > 0, b > 0] = F(inner + b * second(inner))
        return ((vals[True, True] + vals[False, False])
                - (vals[True, False] + vals[False, True]))

    comm = (mixed(h, hp) - mixed(hp, h)) / (4 * step * step)
    return float(abs(comm - delta(witt_bracket(h, hp), F, z, step)))


def contour_moment(p: int) -> Callable:
    """``F(curve) = integral of z**p dz`` along the polyline, exact per segment."""
    if p == -1:
        raise ValueError("p = -1 is multivalued along an open arc")

    def F(z):
        z = np.asarray(z, dtype=complex)
        return complex(z[-1] ** (p + 1) - z[0] ** (p + 1)) / (p + 1)

    return F


def parametric_moment(p: int) -> Callable:
    """``F(curve) = mean of z_k**p`` over the sample points."""

    def F(z):
        return complex(np.mean(np.asarray(z, dtype=complex) ** p))

    return F


def joukowsky_ward_check(h: float, w: complex, x, step: float = 1e-5, f=None,
                         grad=None) -> float:
    """Residual of the first-order Ward identity for a primary two-point function.

    The left side differentiates ``prod_i g'(x_i)**h f(g(x))`` at ``eta = 0`` for
    ``g(z) = z + eta/(w - z)``; the right side applies
    ``sum_i h/(w - x_i)**2 + 1/(w - x_i) d/dx_i`` to ``f``.
    """
    _check_step(step)
    x = np.asarray(x, dtype=complex)
    if x.shape != (2,) and f is None:
        raise ValueError("the default test correlator takes two points")
    if np.any(np.isclose(x, w, rtol=0, atol=1e-12)):
        raise ValueError("insertion coincides with the map's pole")
    diffs = np.abs(x[:, None] - x[None, :])[~np.eye(len(x), dtype=bool)]
    if np.any(diffs < 1e-12):
        raise ValueError("coincident points")
    if f is None:
        def f(p):
            return (p[0] - p[1]) ** (-2 * h)

        def grad(p):
            d = -2 * h * (p[0] - p[1]) ** (-2 * h - 1)
            return np.array([d, -d])
    elif grad is None:
        raise ValueError("supply grad together with a custom correlator")

    u = 1.0 / (w - x)

    def transformed(eta):
        return np.prod((1 + eta * u ** 2) ** h) * f(x + eta * u)

    lhs = (transformed(step) - transformed(-step)) / (2 * step)
    rhs = np.sum(h * u ** 2) * f(x) + np.sum(u * grad(x))
    return float(abs(lhs - rhs))


# --------------------------------------------------------------------------
# exact connection check

# Formal functions are dicts keyed by ("1",), ("d", a) = Delta_a log Z and
# ("dd", a, b) = Delta_a Delta_b log Z, with coefficients polynomial in c.

def _acc(out: dict, key, v: Poly) -> None:
    s = out.get(key)
    s = v if s is None else s + v
    if s:
        out[key] = s
    else:
        out.pop(key, None)


def _gamma(ell: int) -> dict:
    return {("d", ell): Poly.const(1)} if ell <= -2 else {}


def _normalize(expr: dict) -> dict:
    """Rewrite second derivatives with the Witt relation and the log Z equations."""
    todo = dict(expr)
    out: dict = {}
    while todo:
        key, v = todo.popitem()
        if key[0] != "dd":
            _acc(out, key, v)
            continue
        _, a, b = key
        if a >= -1 and b <= -2:
            if a + b >= -1:
                _acc(out, ("1",), v * central_term(a, b))
            else:
                # Delta_b Delta_a log Z = 0 here, and the commutator leaves a first derivative
                _acc(todo, ("d", a + b), v * (a - b))
        elif a <= -2 and b >= -1:
            if a + b >= -1:
                _acc(out, ("1",), v * central_term(b, a))
                _acc(todo, ("d", a + b), v * (a - b))
            # otherwise Delta_a Delta_b log Z vanishes outright
        elif a > b:
            _acc(todo, ("dd", b, a), v)
            _acc(todo, ("d", a + b), v * (a - b))
        else:
            _acc(out, key, v)
    return out


@dataclass(frozen=True)
class BracketDecomposition:
    n: int
    m: int
    field_modes: dict          # [D_n, D_m] = sum_l field_modes[l] D_l + central
    central: Poly
    curvature: Poly
    expected: Poly
    leftover: dict             # anything the rewrite rules could not close

    @property
    def ok(self) -> bool:
        return (not self.leftover and self.central == self.expected
                and self.curvature == self.expected)


def _commutator(n: int, m: int) -> tuple[VectorField, dict]:
    """``[D_n, D_m]`` as (vector field, multiplication function)."""
    hn, hm = VectorField.mode(n), VectorField.mode(m)
    mult: dict = {}
    # [X + a, Y + b] = [X, Y] + X(b) - Y(a)
    for (_, k), v in _gamma(m).items():
        _acc(mult, ("dd", n, k), v)
    for (_, k), v in _gamma(n).items():
        _acc(mult, ("dd", m, k), -v)
    return witt_bracket(hn, hm), mult


def _subtract_D(mult: dict, modes: dict) -> dict:
    out = dict(mult)
    for ell, coef in modes.items():
        for key, v in _gamma(ell).items():
            _acc(out, key, v * (-coef))
    return out


def _as_constant(expr: dict) -> tuple[Poly, dict]:
    const = expr.get(("1",), Poly.zero(1))
    rest = {k: v for k, v in expr.items() if k != ("1",)}
    return const, rest


def connection_rep_check(n: int, m: int, check: bool = False) -> BracketDecomposition:
    """Decompose ``[D[h_n], D[h_m]]`` into ``(n-m) D[h_{n+m}]`` plus a central term."""
    if abs(n) > 10 or abs(m) > 10:
        raise ValueError("mode indices are limited to |n|, |m| <= 10")
    field_, mult = _commutator(n, m)
    modes = field_.modes()
    structure = {n + m: Fraction(n - m)} if n != m else {}
    # route 1: structure constants of the Witt algebra
    central, rest1 = _as_constant(_normalize(_subtract_D(mult, structure)))
    # route 2: the bracket field from polynomial algebra
    curv, rest2 = _as_constant(_normalize(_subtract_D(mult, modes)))
    leftover = dict(rest1)
    leftover.update(rest2)
    if modes != structure:
        leftover[("field",)] = modes
    out = BracketDecomposition(n, m, modes, central, curv, central_term(n, m), leftover)
    if check and not out.ok:
        raise ArithmeticError(f"bracket [{n}, {m}] did not close: {out}")
    return out
