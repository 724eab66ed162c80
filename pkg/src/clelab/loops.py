"""Domain-wall loops: extraction, nesting, and geometric predicates.

Loops are stored as unwrapped polylines. The first vertex lies in the
periodic window and each later vertex is the minimum-image step from its
predecessor, so a contractible loop is an honest planar polygon and a
wrapping loop ends one period away from where it started. The homology
class ``(a, b)`` counts those net periods.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numba import njit

from .lattice import HoneycombLattice, LoopModelConfig, SpinConfig


# --------------------------------------------------------------------------
# numeric kernels
# --------------------------------------------------------------------------

@njit(cache=True)
def _trace_all(occ, edge_verts, vert_edges):
    """Split the occupied edge set into closed vertex cycles.

    Returns ``(seq, offsets, first_edge)`` with loop ``k`` being
    ``seq[offsets[k]:offsets[k+1]]``.
    """
    ne = occ.shape[0]
    seen = np.zeros(ne, dtype=np.bool_)
    seq = np.empty(ne, dtype=np.int64)
    offsets = np.empty(ne + 1, dtype=np.int64)
    first = np.empty(ne, dtype=np.int64)
    pos = 0
    nl = 0
    for e0 in range(ne):
        if occ[e0] == 0 or seen[e0]:
            continue
        offsets[nl] = pos
        first[nl] = e0
        nl += 1
        v0 = edge_verts[e0, 0]
        seq[pos] = v0
        pos += 1
        e = e0
        v = edge_verts[e0, 1]
        seen[e0] = True
        while v != v0:
            seq[pos] = v
            pos += 1
            nxt = -1
            for q in range(3):
                c = vert_edges[v, q]
                if c != e and occ[c] != 0:
                    nxt = c
            assert nxt >= 0 and not seen[nxt]
            seen[nxt] = True
            e = nxt
            v = edge_verts[e, 1] if edge_verts[e, 0] == v else edge_verts[e, 0]
        # the closing edge back to v0 was marked when it was chosen as ``nxt``
    offsets[nl] = pos
    return seq[:pos], offsets[: nl + 1], first[:nl]


@njit(cache=True)
def winding_number(poly, px, py):
    """Signed crossings of the closed polygon ``poly`` around ``(px, py)``.

    Upward edges include their start and exclude their end, downward edges the
    reverse, so rays through vertices are counted once.
    """
    wn = 0
    m = poly.shape[0]
    for i in range(m):
        x0, y0 = poly[i, 0], poly[i, 1]
        j = i + 1 if i + 1 < m else 0
        x1, y1 = poly[j, 0], poly[j, 1]
        if y0 <= py:
            if y1 > py:
                if (x1 - x0) * (py - y0) - (px - x0) * (y1 - y0) > 0:
                    wn += 1
        elif y1 <= py:
            if (x1 - x0) * (py - y0) - (px - x0) * (y1 - y0) < 0:
                wn -= 1
    return wn


@njit(cache=True)
def _all_between(pts, inner, outer):
    for k in range(pts.shape[0]):
        if winding_number(outer, pts[k, 0], pts[k, 1]) == 0:
            return False
        if winding_number(inner, pts[k, 0], pts[k, 1]) != 0:
            return False
    return True


@njit(cache=True)
def _grid_cells(pts, s, closed):
    """Cells ``floor(p/s)`` visited by the polyline, by exact grid traversal."""
    m = pts.shape[0]
    nseg = m if closed else m - 1
    cap = 16
    out = np.empty((cap, 2), dtype=np.int64)
    n = 0
    for i in range(max(nseg, 0) if m > 1 else 0):
        x0, y0 = pts[i, 0] / s, pts[i, 1] / s
        j = i + 1 if i + 1 < m else 0
        x1, y1 = pts[j, 0] / s, pts[j, 1] / s
        ix, iy = int(np.floor(x0)), int(np.floor(y0))
        jx, jy = int(np.floor(x1)), int(np.floor(y1))
        dx, dy = x1 - x0, y1 - y0
        sx = 1 if dx > 0 else -1
        sy = 1 if dy > 0 else -1
        tx = ((ix + (1 if sx > 0 else 0)) - x0) / dx if dx != 0 else np.inf
        ty = ((iy + (1 if sy > 0 else 0)) - y0) / dy if dy != 0 else np.inf
        ddx = abs(1.0 / dx) if dx != 0 else np.inf
        ddy = abs(1.0 / dy) if dy != 0 else np.inf
        steps = abs(jx - ix) + abs(jy - iy)
        for k in range(steps + 1):
            if n == cap:
                cap *= 2
                bigger = np.empty((cap, 2), dtype=np.int64)
                bigger[:n] = out[:n]
                out = bigger
            out[n, 0] = ix
            out[n, 1] = iy
            n += 1
            if k == steps:
                break
            if tx < ty:
                ix += sx
                tx += ddx
            else:
                iy += sy
                ty += ddy
    if m == 1:
        out[0, 0] = int(np.floor(pts[0, 0] / s))
        out[0, 1] = int(np.floor(pts[0, 1] / s))
        n = 1
    return out[:n]


# --------------------------------------------------------------------------
# geometry helpers
# --------------------------------------------------------------------------

def signed_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Monotone-chain hull, counter-clockwise, without repeated endpoint."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def hull_diameter(points: np.ndarray) -> float:
    """Largest pairwise distance, by rotating calipers on the convex hull."""
    h = convex_hull(points)
    m = len(h)
    if m == 1:
        return 0.0
    if m == 2:
        return float(np.hypot(*(h[1] - h[0])))

    def area2(a, b, c):
        return abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))

    best = 0.0
    j = 1
    for i in range(m):
        i2 = (i + 1) % m
        while area2(h[i], h[i2], h[(j + 1) % m]) > area2(h[i], h[i2], h[j]):
            j = (j + 1) % m
        for a in (i, i2):
            best = max(best, float(np.hypot(*(h[a] - h[j]))))
    return best


# --------------------------------------------------------------------------
# data types
# --------------------------------------------------------------------------

@dataclass(eq=False)
class Loop:
    """Closed polyline; ``vertices`` does not repeat its first point."""

    vertices: np.ndarray
    homology: tuple[int, int] = (0, 0)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise ValueError("vertices must have shape (M, 2)")
        self.homology = (int(self.homology[0]), int(self.homology[1]))

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def trivial(self) -> bool:
        return self.homology == (0, 0)

    @cached_property
    def bbox(self) -> tuple[float, float, float, float]:
        lo, hi = self.vertices.min(axis=0), self.vertices.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    @cached_property
    def diameter(self) -> float:
        return hull_diameter(self.vertices)

    @cached_property
    def area(self) -> float:
        return signed_area(self.vertices)

    def winding_about(self, w: complex) -> int:
        return int(winding_number(self.vertices, w.real, w.imag))

    def shifted(self, dx: float, dy: float) -> "Loop":
        return Loop(self.vertices + np.array([dx, dy]), self.homology)


@dataclass
class LoopSet:
    loops: list
    period: tuple[float, float] | None = None
    parent: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.parent is None:
            self.parent = build_nesting(self)

    def __len__(self) -> int:
        return len(self.loops)

    def __iter__(self):
        return iter(self.loops)

    @property
    def homology(self) -> list[tuple[int, int]]:
        return [lp.homology for lp in self.loops]

    def depth(self, i: int) -> int:
        d = 0
        while self.parent[i] >= 0:
            i = self.parent[i]
            d += 1
        return d

    def trivial_loops(self) -> list[Loop]:
        return [lp for lp in self.loops if lp.trivial]


@dataclass
class AnnularRegion:
    """Region between two nested closed curves around ``center``."""

    inner: np.ndarray
    outer: np.ndarray
    center: complex

    def __post_init__(self):
        self.inner = np.ascontiguousarray(self.inner, dtype=float)
        self.outer = np.ascontiguousarray(self.outer, dtype=float)
        c = self.center
        if winding_number(self.inner, c.real, c.imag) == 0:
            raise ValueError("center must lie inside the inner curve")
        if not all(winding_number(self.outer, p[0], p[1]) != 0 for p in self.inner):
            raise ValueError("inner curve must lie inside the outer curve")
        lo_o, hi_o = self.outer.min(axis=0), self.outer.max(axis=0)
        lo_i, hi_i = self.inner.min(axis=0), self.inner.max(axis=0)
        self._obox = (lo_o[0], lo_o[1], hi_o[0], hi_o[1])
        self._ibox = (lo_i[0], lo_i[1], hi_i[0], hi_i[1])

    def contains_point(self, x: float, y: float) -> bool:
        return (winding_number(self.outer, x, y) != 0
                and winding_number(self.inner, x, y) == 0)


# --------------------------------------------------------------------------
# operations
# --------------------------------------------------------------------------

def _min_image(d: np.ndarray, period: tuple[float, float]) -> np.ndarray:
    p = np.asarray(period)
    return d - p * np.round(d / p)


def extract_loops(config: LoopModelConfig, spins: np.ndarray | None = None) -> LoopSet:
    """Trace the occupied edges of a loop configuration into a :class:`LoopSet`.

    With ``spins`` given, each loop is oriented with the +1 face on its left;
    otherwise contractible loops are made counter-clockwise.
    """
    lat: HoneycombLattice = config.lattice
    period = lat.period
    seq, offsets, first_edge = _trace_all(config.occupied, lat.edge_verts, lat.vert_edges)
    loops = []
    for k in range(len(offsets) - 1):
        vids = seq[offsets[k]: offsets[k + 1]]
        xy = lat.vert_xy[vids]
        steps = _min_image(np.diff(xy, axis=0, append=xy[:1]), period)
        pts = np.empty_like(xy)
        pts[0] = xy[0]
        pts[1:] = xy[0] + np.cumsum(steps[:-1], axis=0)
        total = steps.sum(axis=0)
        hom = (int(round(total[0] / period[0])), int(round(total[1] / period[1])))
        if spins is not None:
            e = first_edge[k]
            d = steps[0]
            mid = xy[0] + 0.5 * d
            f0 = lat.edge_faces[e, 0]
            rel = _min_image(lat.face_xy[f0] - mid, period)
            left_is_f0 = d[0] * rel[1] - d[1] * rel[0] > 0
            plus_left = (spins[f0] > 0) == left_is_f0
            if not plus_left:
                pts = np.roll(pts[::-1], 1, axis=0)
                hom = (-hom[0], -hom[1])
        elif hom == (0, 0) and signed_area(pts) < 0:
            pts = np.roll(pts[::-1], 1, axis=0)
        loops.append(Loop(pts, hom))
    return LoopSet(loops, period)


def extract_boundaries(config: SpinConfig) -> LoopSet:
    """Loops separating opposite-spin faces, +1 phase on the left."""
    return extract_loops(LoopModelConfig.from_spins(config), spins=config.spins)


def _image_shifts(point, box, period):
    """Integer shifts ``(i, j)`` putting ``point + (i px, j py)`` inside ``box``."""
    if period is None:
        return [(0, 0)] if box[0] <= point[0] <= box[2] and box[1] <= point[1] <= box[3] else []
    px, py = period
    i0, i1 = int(np.ceil((box[0] - point[0]) / px)), int(np.floor((box[2] - point[0]) / px))
    j0, j1 = int(np.ceil((box[1] - point[1]) / py)), int(np.floor((box[3] - point[1]) / py))
    return [(i, j) for i in range(i0, i1 + 1) for j in range(j0, j1 + 1)]


def build_nesting(ls: LoopSet) -> np.ndarray:
    """Parent index per loop (smallest-area contractible loop enclosing it), or -1."""
    loops = ls.loops
    n = len(loops)
    parent = np.full(n, -1, dtype=np.int64)
    idx = [i for i in range(n) if loops[i].trivial]
    if len(idx) < 2:
        return parent
    areas = np.array([abs(loops[i].area) for i in idx])
    boxes = np.array([loops[i].bbox for i in idx])
    order = np.argsort(areas, kind="stable")
    areas, boxes = areas[order], boxes[order]
    idx = [idx[o] for o in order]
    period = ls.period
    for a, i in enumerate(idx):
        p = loops[i].vertices[0]
        # candidates: strictly larger area, ascending, with some image of p in the box
        lo = np.searchsorted(areas, areas[a], side="right")
        bx = boxes[lo:]
        if period is None:
            hit = ((bx[:, 0] <= p[0]) & (p[0] <= bx[:, 2])
                   & (bx[:, 1] <= p[1]) & (p[1] <= bx[:, 3]))
        else:
            px, py = period
            hit = ((np.ceil((bx[:, 0] - p[0]) / px) <= np.floor((bx[:, 2] - p[0]) / px))
                   & (np.ceil((bx[:, 1] - p[1]) / py) <= np.floor((bx[:, 3] - p[1]) / py)))
        for b in lo + np.nonzero(hit)[0]:
            outer = loops[idx[b]]
            if any(winding_number(outer.vertices, p[0] + si * (period[0] if period else 0),
                                  p[1] + sj * (period[1] if period else 0)) != 0
                   for si, sj in _image_shifts(p, boxes[b], period)):
                parent[i] = idx[b]
                break
    return parent


def loop_winds_in(loop: Loop, region: AnnularRegion, period: tuple[float, float] | None = None) -> bool:
    """Loop lies strictly in the annulus and winds once about its center.

    On a torus every periodic image of the loop is tried.
    """
    if not loop.trivial:
        return False
    ox0, oy0, ox1, oy1 = region._obox
    ix0, iy0, ix1, iy1 = region._ibox
    bx0, by0, bx1, by1 = loop.bbox
    w, h = bx1 - bx0, by1 - by0
    if w > ox1 - ox0 or h > oy1 - oy0 or w < ix1 - ix0 or h < iy1 - iy0:
        return False
    if period is None:
        shifts = [(0.0, 0.0)]
    else:
        px, py = period
        shifts = [(i * px, j * py)
                  for i in range(int(np.ceil((ox0 - bx0) / px)), int(np.floor((ox1 - bx1) / px)) + 1)
                  for j in range(int(np.ceil((oy0 - by0) / py)), int(np.floor((oy1 - by1) / py)) + 1)]
    c = region.center
    for dx, dy in shifts:
        if not (bx0 + dx >= ox0 and bx1 + dx <= ox1 and by0 + dy >= oy0 and by1 + dy <= oy1):
            continue
        if not (bx0 + dx <= ix0 and bx1 + dx >= ix1 and by0 + dy <= iy0 and by1 + dy >= iy1):
            continue
        pts = loop.vertices + np.array([dx, dy])
        if abs(winding_number(pts, c.real, c.imag)) != 1:
            continue
        if _all_between(pts, region.inner, region.outer):
            return True
    return False


def indicator_I(ls: LoopSet, region: AnnularRegion) -> int:
    """1 if at least one loop of ``ls`` winds in ``region``."""
    return int(any(loop_winds_in(lp, region, ls.period) for lp in ls.loops))


def box_counts(loop: Loop | np.ndarray, scales, closed: bool = True) -> np.ndarray:
    """Number of grid boxes of each side length met by the polyline."""
    pts = loop.vertices if isinstance(loop, Loop) else np.ascontiguousarray(loop, dtype=float)
    out = []
    for s in scales:
        if s <= 0:
            raise ValueError("box sizes must be positive")
        cells = _grid_cells(pts, float(s), closed)
        out.append(len(np.unique(cells, axis=0)))
    return np.array(out, dtype=np.int64)
