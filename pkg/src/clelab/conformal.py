"""Probe shapes and conformal maps.

Shapes are hypotrochoids ``w + eps e^{i theta} (b e^{i beta} + b^{1-k} e^{(1-k) i beta})``
(ellipses at ``k = 2``) plus a plain circle. Maps expose their first three
derivatives so that the Schwarzian and the stress-tensor transformation can be
evaluated in closed form for Möbius and Joukowsky maps, through the chain rule
for compositions, and by contour-integral differentiation for anything else.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .loops import AnnularRegion


# --------------------------------------------------------------------------
# shapes
# --------------------------------------------------------------------------

def _as_xy(z: np.ndarray) -> np.ndarray:
    return np.column_stack([z.real, z.imag])


@dataclass(frozen=True)
class Hypotrochoid:
    k: int
    w: complex
    theta: float
    eps: float
    b: float

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 2:
            raise ValueError("k must be an integer >= 2")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if not self.b > (self.k - 1) ** (1.0 / self.k):
            raise ValueError(f"b must exceed (k-1)^(1/k) = {(self.k - 1) ** (1 / self.k):.6g}")

    @classmethod
    def ellipse(cls, w: complex, theta: float, ell: float, ecc: float) -> "Hypotrochoid":
        """Ellipse with semi-major axis ``ell`` and eccentricity ``ecc`` (0 < ecc < 1)."""
        if not 0 < ecc < 1:
            raise ValueError("eccentricity must lie in (0, 1)")
        return cls(2, complex(w), theta, ecc * ell / 2, 1 / ecc + math.sqrt(1 / ecc**2 - 1))

    @property
    def center(self) -> complex:
        return self.w

    @property
    def scale(self) -> float:
        return self.eps

    def point(self, beta):
        beta = np.asarray(beta, dtype=float)
        k, b = self.k, self.b
        return self.w + self.eps * np.exp(1j * self.theta) * (
            b * np.exp(1j * beta) + b ** (1 - k) * np.exp((1 - k) * 1j * beta))

    def tangent(self, beta):
        beta = np.asarray(beta, dtype=float)
        k, b = self.k, self.b
        return self.eps * np.exp(1j * self.theta) * 1j * (
            b * np.exp(1j * beta) + (1 - k) * b ** (1 - k) * np.exp((1 - k) * 1j * beta))

    def with_scale(self, eps: float) -> "Hypotrochoid":
        return Hypotrochoid(self.k, self.w, self.theta, eps, self.b)

    def with_theta(self, theta: float) -> "Hypotrochoid":
        return Hypotrochoid(self.k, self.w, theta, self.eps, self.b)

    def with_center(self, w: complex) -> "Hypotrochoid":
        return Hypotrochoid(self.k, complex(w), self.theta, self.eps, self.b)

    def default_samples(self) -> int:
        return max(256, 64 * self.k)

    def polyline(self, M: int | None = None) -> np.ndarray:
        M = M or self.default_samples()
        return _as_xy(self.point(2 * np.pi * np.arange(M) / M))


@dataclass(frozen=True)
class Circle:
    """Round probe; behaves as the ``b -> inf`` end of the ``k = 2`` family."""

    w: complex
    r: float
    theta: float = 0.0
    k = 2

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("radius must be positive")

    @property
    def center(self) -> complex:
        return self.w

    @property
    def scale(self) -> float:
        return self.r

    def point(self, beta):
        return self.w + self.r * np.exp(1j * (self.theta + np.asarray(beta, dtype=float)))

    def tangent(self, beta):
        return 1j * self.r * np.exp(1j * (self.theta + np.asarray(beta, dtype=float)))

    def with_scale(self, r: float) -> "Circle":
        return Circle(self.w, r, self.theta)

    def with_theta(self, theta: float) -> "Circle":
        return Circle(self.w, self.r, theta)

    def with_center(self, w: complex) -> "Circle":
        return Circle(complex(w), self.r, self.theta)

    def default_samples(self) -> int:
        return 256

    def polyline(self, M: int | None = None) -> np.ndarray:
        M = M or self.default_samples()
        return _as_xy(self.point(2 * np.pi * np.arange(M) / M))


Shape = Hypotrochoid | Circle


def shape_point(s: Shape, beta):
    return s.point(beta)


def is_star_shaped(s: Shape, M: int | None = None) -> bool:
    """Polar angle about the center increases monotonically along the curve."""
    M = M or 4 * s.default_samples()
    beta = 2 * np.pi * np.arange(M) / M
    z = s.point(beta) - s.center
    # d arg / d beta = Im(z' / z)
    return bool(np.all(np.imag(s.tangent(beta) / z) > 0))


MAX_THICKNESS = 1.0


def annulus_of(s: Shape, delta: float, M: int | None = None) -> AnnularRegion:
    """Thin annulus between the shape scaled by ``1 - delta/2`` and ``1 + delta/2`` about its center."""
    if not 0 < delta < MAX_THICKNESS:
        raise ValueError(f"thickness must lie in (0, {MAX_THICKNESS})")
    if not is_star_shaped(s):
        raise ValueError("shape is not star-shaped about its center; scaled copies may cross")
    M = M or s.default_samples()
    inner = s.with_scale(s.scale * (1 - delta / 2)).polyline(M)
    outer = s.with_scale(s.scale * (1 + delta / 2)).polyline(M)
    return AnnularRegion(inner, outer, complex(s.center))


_SHAPE_RE = re.compile(r"^\s*(hypotrochoid|ellipse|circle)\s*\(([^)]*)\)\s*$")


def parse_shape(text: str) -> Shape:
    """``hypotrochoid(k, w_re, w_im, theta, eps, b)``, ``ellipse(w_re, w_im, theta, ell, ecc)`` or ``circle(w_re, w_im, r)``."""
    m = _SHAPE_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse shape {text!r}")
    kind = m.group(1)
    try:
        args = [float(a) for a in m.group(2).split(",")]
    except ValueError:
        raise ValueError(f"non-numeric shape argument in {text!r}") from None
    want = {"hypotrochoid": 6, "ellipse": 5, "circle": 3}[kind]
    if len(args) != want:
        raise ValueError(f"{kind} takes {want} arguments, got {len(args)}")
    if kind == "hypotrochoid":
        k, wr, wi, th, eps, b = args
        if k != int(k):
            raise ValueError("k must be an integer")
        return Hypotrochoid(int(k), complex(wr, wi), th, eps, b)
    if kind == "ellipse":
        wr, wi, th, ell, ecc = args
        return Hypotrochoid.ellipse(complex(wr, wi), th, ell, ecc)
    wr, wi, r = args
    return Circle(complex(wr, wi), r)


# --------------------------------------------------------------------------
# maps
# --------------------------------------------------------------------------

class ConformalMap:
    """Holomorphic map with access to its first three derivatives."""

    def __call__(self, z):
        return self.apply(z)

    def apply(self, z):
        raise NotImplementedError

    def derivatives(self, z) -> tuple[complex, complex, complex]:
        raise NotImplementedError

    def then(self, outer: "ConformalMap") -> "ComposedMap":
        """``outer ∘ self``."""
        return ComposedMap(outer, self)


@dataclass(frozen=True)
class MobiusMap(ConformalMap):
    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self):
        if self.det == 0:
            raise ValueError("Möbius map needs ad - bc != 0")

    @property
    def det(self) -> complex:
        return self.a * self.d - self.b * self.c

    @classmethod
    def identity(cls) -> "MobiusMap":
        return cls(1, 0, 0, 1)

    def _den(self, z):
        den = self.c * np.asarray(z) + self.d
        if np.any(den == 0):
            raise ValueError("point is the pole of the Möbius map")
        return den

    def apply(self, z):
        den = self._den(z)
        return (self.a * np.asarray(z) + self.b) / den

    def derivatives(self, z):
        den = self._den(z)
        D = self.det
        return D / den**2, -2 * self.c * D / den**3, 6 * self.c**2 * D / den**4

    def compose(self, inner: "MobiusMap") -> "MobiusMap":
        """``self ∘ inner`` by the 2x2 coefficient product."""
        return MobiusMap(self.a * inner.a + self.b * inner.c, self.a * inner.b + self.b * inner.d,
                         self.c * inner.a + self.d * inner.c, self.c * inner.b + self.d * inner.d)

    def inverse(self) -> "MobiusMap":
        return MobiusMap(self.d, -self.b, -self.c, self.a)

    def normalized(self) -> "MobiusMap":
        s = np.sqrt(complex(self.det))
        return MobiusMap(self.a / s, self.b / s, self.c / s, self.d / s)

    def is_identity(self, tol: float = 1e-12) -> bool:
        """Proportional to the identity matrix (coefficients are projective)."""
        n = self.normalized()
        m = np.array([n.a, n.b, n.c, n.d])
        return bool(min(np.abs(m - [1, 0, 0, 1]).max(), np.abs(m + [1, 0, 0, 1]).max()) < tol)

    def schwarzian(self, z):
        self._den(z)
        return 0.0 * np.asarray(z, dtype=complex)


def mobius_apply(G: MobiusMap, z):
    return G.apply(z)


def mobius_compose(G1: MobiusMap, G2: MobiusMap) -> MobiusMap:
    return G1.compose(G2)


@dataclass(frozen=True)
class JoukowskyMap(ConformalMap):
    """``g(z) = z + eta / (w - z)``."""

    w: complex
    eta: complex

    def _u(self, z):
        u = self.w - np.asarray(z)
        if np.any(u == 0):
            raise ValueError("Joukowsky map is singular at its center")
        return u

    def apply(self, z):
        return np.asarray(z) + self.eta / self._u(z)

    def derivatives(self, z):
        u = self._u(z)
        return 1 + self.eta / u**2, 2 * self.eta / u**3, 6 * self.eta / u**4

    @property
    def conformal_radius(self) -> float:
        return math.sqrt(abs(self.eta))


def joukowsky_apply(g: JoukowskyMap, z):
    return g.apply(z)


@dataclass(frozen=True)
class ComposedMap(ConformalMap):
    """``outer ∘ inner`` with derivatives by the chain rule."""

    outer: ConformalMap
    inner: ConformalMap

    def apply(self, z):
        return self.outer.apply(self.inner.apply(z))

    def derivatives(self, z):
        g1, g2, g3 = self.inner.derivatives(z)
        f1, f2, f3 = self.outer.derivatives(self.inner.apply(z))
        return (f1 * g1,
                f2 * g1**2 + f1 * g2,
                f3 * g1**3 + 3 * f2 * g1 * g2 + f1 * g3)


@dataclass(frozen=True)
class FunctionMap(ConformalMap):
    """Arbitrary holomorphic callable; derivatives by a Cauchy contour of radius ``radius``.

    ``radius`` should be well inside the distance to the nearest singularity;
    the aliasing error then falls like ``(radius / distance) ** nodes``.
    """

    func: Callable
    radius: float = 0.1
    nodes: int = 64

    def apply(self, z):
        return self.func(z)

    def derivatives(self, z):
        z = complex(z)
        j = np.arange(self.nodes)
        omega = np.exp(2j * np.pi * j / self.nodes)
        vals = np.asarray(self.func(z + self.radius * omega), dtype=complex)
        out = []
        for n in (1, 2, 3):
            out.append(math.factorial(n) * np.mean(vals * omega ** (-n)) / self.radius**n)
        return tuple(out)


def schwarzian(g: ConformalMap, z):
    """``g'''/g' - (3/2)(g''/g')**2``."""
    if isinstance(g, MobiusMap):
        return g.schwarzian(z)
    d1, d2, d3 = g.derivatives(z)
    scale = np.maximum(1.0, np.maximum(np.abs(d2), np.abs(d3)))
    if np.any(np.abs(d1) < 1e-12 * scale):
        raise ValueError("derivative vanishes; Schwarzian undefined")
    return d3 / d1 - 1.5 * (d2 / d1) ** 2


def stress_transform(g: ConformalMap, w, c: float, T_value):
    """``g'(w)**2 * T + (c/12) {g, w}``."""
    d1 = g.derivatives(w)[0]
    return d1**2 * T_value + (c / 12.0) * schwarzian(g, w)
