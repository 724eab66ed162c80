"""Honeycomb lattice geometry, spin / loop-gas configurations and model constants.

Spins live on the hexagonal faces of the honeycomb lattice, so the face
adjacency graph is a triangular lattice. Faces are laid out in offset rows
(odd rows shifted by half a spacing) on a periodic ``Lx x Ly`` window.

Index conventions
-----------------
* face ``f = j * Lx + i`` for column ``i`` and row ``j``.
* neighbour slots, counter-clockwise: ``E, NE, NW, W, SW, SE``.
* edge ``e = 3 * f + d`` is the honeycomb edge dual to the bond between
  ``f`` and its neighbour in forward direction ``d`` (0=E, 1=NE, 2=NW).
* vertex ``2 * f`` is the up-triangle ``(f, E, NE)``, vertex ``2 * f + 1`` the
  down-triangle ``(f, NE, NW)``; vertices sit at the triangle centroids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

E, NE, NW, W, SW, SE = range(6)
SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True, eq=False)
class HoneycombLattice:
    """Periodic honeycomb lattice; immutable after construction."""

    Lx: int
    Ly: int
    spacing: float
    face_xy: np.ndarray = field(repr=False)
    face_nbr: np.ndarray = field(repr=False)
    face_edges: np.ndarray = field(repr=False)
    face_verts: np.ndarray = field(repr=False)
    edge_faces: np.ndarray = field(repr=False)
    edge_verts: np.ndarray = field(repr=False)
    vert_edges: np.ndarray = field(repr=False)
    vert_xy: np.ndarray = field(repr=False)
    boundary: str = "periodic"

    @property
    def n_faces(self) -> int:
        return self.Lx * self.Ly

    @property
    def n_edges(self) -> int:
        return 3 * self.n_faces

    @property
    def n_vertices(self) -> int:
        return 2 * self.n_faces

    @property
    def period(self) -> tuple[float, float]:
        """Size of the periodic window in unit-window coordinates."""
        return (self.Lx * self.spacing, self.Ly * self.spacing * SQRT3 / 2)

    @cached_property
    def dims(self) -> tuple[int, int]:
        return (self.Lx, self.Ly)

    def face_index(self, i: int, j: int) -> int:
        return (j % self.Ly) * self.Lx + (i % self.Lx)

    def translate_index(self, direction: int, distance: int) -> np.ndarray:
        """Face map ``f -> f + distance * direction`` along a lattice axis."""
        idx = np.arange(self.n_faces)
        for _ in range(distance):
            idx = self.face_nbr[idx, direction]
        return idx


def build_lattice(Lx: int, Ly: int) -> HoneycombLattice:
    """Build a periodic honeycomb lattice with ``Lx * Ly`` hexagonal faces."""
    if Lx < 2 or Ly < 2 or Lx % 2 or Ly % 2:
        raise ValueError(f"lattice dimensions must be even and >= 2, got ({Lx}, {Ly})")

    # isotropic scaling so that every face point lies in [0, 1)^2
    a = 1.0 / max(Lx, Ly * SQRT3 / 2)
    N = Lx * Ly
    jj, ii = np.divmod(np.arange(N), Lx)
    odd = jj & 1
    face_xy = np.column_stack([a * (ii + 0.5 * odd), a * SQRT3 / 2 * jj])

    def fid(i, j):
        return (j % Ly) * Lx + (i % Lx)

    nbr = np.empty((N, 6), dtype=np.int64)
    nbr[:, E] = fid(ii + 1, jj)
    nbr[:, NE] = fid(ii + odd, jj + 1)
    nbr[:, NW] = fid(ii + odd - 1, jj + 1)
    nbr[:, W] = fid(ii - 1, jj)
    nbr[:, SW] = fid(ii + odd - 1, jj - 1)
    nbr[:, SE] = fid(ii + odd, jj - 1)

    f = np.arange(N)
    edge_faces = np.empty((3 * N, 2), dtype=np.int64)
    edge_faces[:, 0] = np.repeat(f, 3)
    edge_faces[:, 1] = nbr[:, :3].ravel()

    face_edges = np.column_stack(
        [3 * f + 0, 3 * f + 1, 3 * f + 2,
         3 * nbr[:, W] + 0, 3 * nbr[:, SW] + 1, 3 * nbr[:, SE] + 2]
    )
    # hexagon corners ccw from 30 degrees; face_edges[:, k] (dual to neighbour
    # slot k) joins face_verts[:, k-1] and face_verts[:, k]
    face_verts = np.column_stack(
        [2 * f, 2 * f + 1, 2 * nbr[:, W], 2 * nbr[:, SW] + 1, 2 * nbr[:, SW], 2 * nbr[:, SE] + 1]
    )

    edge_verts = np.empty((3 * N, 2), dtype=np.int64)
    edge_verts[0::3] = np.column_stack([2 * f, 2 * nbr[:, SE] + 1])
    edge_verts[1::3] = np.column_stack([2 * f, 2 * f + 1])
    edge_verts[2::3] = np.column_stack([2 * f + 1, 2 * nbr[:, W]])

    order = np.argsort(edge_verts.ravel(), kind="stable")
    counts = np.bincount(edge_verts.ravel(), minlength=2 * N)
    if not np.all(counts == 3):
        raise AssertionError("honeycomb vertex with degree != 3")
    vert_edges = (order // 2).reshape(2 * N, 3)

    vert_xy = np.empty((2 * N, 2))
    vert_xy[0::2] = face_xy + a * np.array([0.5, SQRT3 / 6])
    vert_xy[1::2] = face_xy + a * np.array([0.0, SQRT3 / 3])
    period = np.array([Lx * a, Ly * a * SQRT3 / 2])
    vert_xy %= period

    for arr in (face_xy, nbr, face_edges, face_verts, edge_faces, edge_verts, vert_edges, vert_xy):
        arr.setflags(write=False)
    return HoneycombLattice(
        Lx=Lx, Ly=Ly, spacing=a, face_xy=face_xy, face_nbr=nbr, face_edges=face_edges,
        face_verts=face_verts, edge_faces=edge_faces, edge_verts=edge_verts,
        vert_edges=vert_edges, vert_xy=vert_xy,
    )


@dataclass
class SpinConfig:
    lattice: HoneycombLattice
    spins: np.ndarray

    def __post_init__(self):
        self.spins = np.asarray(self.spins, dtype=np.int8)
        if self.spins.shape != (self.lattice.n_faces,):
            raise ValueError("spin array length must equal the face count")
        if not np.all(np.abs(self.spins) == 1):
            raise ValueError("spins must be +1 or -1")

    @classmethod
    def uniform(cls, lattice: HoneycombLattice, value: int = 1) -> "SpinConfig":
        return cls(lattice, np.full(lattice.n_faces, value, dtype=np.int8))

    @classmethod
    def random(cls, lattice: HoneycombLattice, rng: np.random.Generator) -> "SpinConfig":
        return cls(lattice, rng.choice(np.array([-1, 1], dtype=np.int8), size=lattice.n_faces))

    def copy(self) -> "SpinConfig":
        return SpinConfig(self.lattice, self.spins.copy())

    @property
    def magnetization(self) -> float:
        return float(self.spins.mean())


@dataclass
class LoopModelConfig:
    lattice: HoneycombLattice
    occupied: np.ndarray

    def __post_init__(self):
        self.occupied = np.asarray(self.occupied, dtype=np.uint8)
        if self.occupied.shape != (self.lattice.n_edges,):
            raise ValueError("occupation array length must equal the edge count")
        deg = self.occupied[self.lattice.vert_edges].sum(axis=1)
        if np.any((deg != 0) & (deg != 2)):
            raise ValueError("loop-gas constraint violated: vertex degree not in {0, 2}")

    @classmethod
    def empty(cls, lattice: HoneycombLattice) -> "LoopModelConfig":
        return cls(lattice, np.zeros(lattice.n_edges, dtype=np.uint8))

    @classmethod
    def from_faces(cls, lattice: HoneycombLattice, faces) -> "LoopModelConfig":
        """Symmetric difference of the hexagons around ``faces``."""
        occ = np.zeros(lattice.n_edges, dtype=np.uint8)
        for f in faces:
            occ[lattice.face_edges[f]] ^= 1
        return cls(lattice, occ)

    @classmethod
    def from_spins(cls, config: SpinConfig) -> "LoopModelConfig":
        """Domain walls of a spin configuration."""
        ef = config.lattice.edge_faces
        occ = (config.spins[ef[:, 0]] != config.spins[ef[:, 1]]).astype(np.uint8)
        return cls(config.lattice, occ)

    def copy(self) -> "LoopModelConfig":
        return LoopModelConfig(self.lattice, self.occupied.copy())

    @property
    def n_occupied(self) -> int:
        return int(self.occupied.sum())


@dataclass(frozen=True)
class ModelParams:
    """Thermal parameters; ``x = exp(-1/T)`` and ``n = exp(-m/T) = x**m``."""

    J: float = -1.0
    h: float = 0.0
    T: float = 1.0
    m: float = 0.0

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"temperature must be positive, got {self.T}")

    @property
    def x(self) -> float:
        return math.exp(-1.0 / self.T)

    @property
    def n(self) -> float:
        return math.exp(-self.m / self.T)

    @property
    def K(self) -> float:
        """Reduced ferromagnetic coupling ``-J/T``."""
        return -self.J / self.T

    @classmethod
    def ising(cls, K: float, h: float = 0.0) -> "ModelParams":
        if K <= 0:
            raise ValueError("K must be positive")
        return cls(J=-1.0, h=h, T=1.0 / K)

    @classmethod
    def loop_gas(cls, x: float, n: float) -> "ModelParams":
        if not 0 < x < 1:
            raise ValueError("x must lie in (0, 1)")
        if n <= 0:
            raise ValueError("n must be positive")
        T = -1.0 / math.log(x)
        return cls(T=T, m=math.log(n) / math.log(x))


def ising_energy(config: SpinConfig, J: float, h: float) -> float:
    """``J * sum_<fg> s_f s_g - h * sum_f s_f``, each bond counted once."""
    s = config.spins.astype(np.int64)
    ef = config.lattice.edge_faces
    return float(J * np.sum(s[ef[:, 0]] * s[ef[:, 1]]) - h * np.sum(s))


def count_loops(config: LoopModelConfig) -> int:
    """Number of connected components of the occupied edge set."""
    lat = config.lattice
    occ = config.occupied.astype(bool)
    seen = np.zeros(lat.n_edges, dtype=bool)
    n = 0
    for e0 in np.flatnonzero(occ):
        if seen[e0]:
            continue
        n += 1
        e, v = e0, lat.edge_verts[e0, 1]
        while True:
            seen[e] = True
            nxt = [g for g in lat.vert_edges[v] if occ[g] and g != e]
            e = nxt[0]
            if e == e0:
                break
            a, b = lat.edge_verts[e]
            v = b if a == v else a
    return n


def loop_model_weight(config: LoopModelConfig, x: float, n: float) -> float:
    """Boltzmann weight ``x**ell * n**N`` of a loop-gas configuration."""
    deg = config.occupied[config.lattice.vert_edges].sum(axis=1)
    if np.any((deg != 0) & (deg != 2)):
        raise ValueError("loop-gas constraint violated")
    return float(x ** config.n_occupied * n ** count_loops(config))


def critical_x(n: float) -> float:
    """Critical edge activity of the honeycomb O(n) model, ``(2 + sqrt(2 - n))**-1/2``."""
    if not 0 <= n <= 2:
        raise ValueError(f"n must lie in [0, 2], got {n}")
    return 1.0 / math.sqrt(2.0 + math.sqrt(2.0 - n))


def kappa_to_c(kappa: float) -> float:
    if not 8 / 3 - 1e-12 <= kappa <= 8 + 1e-12:
        raise ValueError(f"kappa must lie in [8/3, 8], got {kappa}")
    return (3 * kappa - 8) * (6 - kappa) / (2 * kappa)


def c_to_kappa_dilute(c: float) -> float:
    """Dilute-branch inverse of :func:`kappa_to_c`, kappa in [8/3, 4]."""
    if not 0 <= c <= 1:
        raise ValueError(f"c must lie in [0, 1] on the dilute branch, got {c}")
    # 3 kappa^2 - (26 - 2c) kappa + 48 = 0, smaller root
    b = 26 - 2 * c
    disc = b * b - 4 * 3 * 48
    return (b - math.sqrt(disc)) / 6
