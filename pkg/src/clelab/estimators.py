"""Estimators over loop and spin ensembles, with jackknife errors.

Shape observables reduce to a hit matrix ``H[i, p]``: whether sample ``i``
has a loop winding in probe annulus ``p``. Everything else (ratios, Fourier
modes, connected products) is a function of column means of ``H`` and of
products of its columns, so jackknife resampling is over rows.

Probe annuli are scaled copies of star-shaped curves, so "inside" reduces to
comparing a vertex's distance from the center with the polyline radius along
the same ray, which is exact for the sampled polygon and costs
``O(log M)`` per vertex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .conformal import Hypotrochoid, annulus_of
from .loops import AnnularRegion, LoopSet, winding_number

DEFAULT_LADDER = (0.2, 0.14, 0.1, 0.07, 0.05)
DEFAULT_DELTA = 0.1
MIN_SCALE_IN_SPACINGS = 5.0


class UndefinedEstimate(ValueError):
    """Raised when an estimator's denominator has no support in the data."""


@dataclass
class Estimate:
    value: complex | float
    error: float
    n_samples: int
    error_re: float | None = None
    error_im: float | None = None
    extra: dict = field(default_factory=dict)

    def __iter__(self):
        yield self.value
        yield self.error

    @property
    def real(self) -> float:
        return float(np.real(self.value))

    @property
    def imag(self) -> float:
        return float(np.imag(self.value))


# --------------------------------------------------------------------------
# error analysis
# --------------------------------------------------------------------------

def _blocks(n: int, n_blocks: int | None) -> list[np.ndarray]:
    nb = n if n_blocks is None else min(n_blocks, n)
    return np.array_split(np.arange(n), nb)


def jackknife(data: np.ndarray, func, n_blocks: int | None = None):
    """Delete-one-block jackknife of ``func(column means)``.

    ``data`` has one row per sample. Returns ``(estimate, variance)``; the
    variance is component-wise for real/imag parts if ``func`` is complex.
    """
    data = np.asarray(data)
    n = len(data)
    if n < 2:
        raise UndefinedEstimate("need at least two samples for a jackknife")
    total = data.sum(axis=0)
    full = func(total / n)
    blocks = _blocks(n, n_blocks)
    vals = []
    for idx in blocks:
        part = (total - data[idx].sum(axis=0)) / (n - len(idx))
        vals.append(func(part))
    vals = np.asarray(vals)
    nb = len(blocks)
    mean = vals.mean(axis=0)
    dev = vals - mean
    var_re = (nb - 1) / nb * np.sum(np.real(dev) ** 2, axis=0)
    var_im = (nb - 1) / nb * np.sum(np.imag(dev) ** 2, axis=0)
    return full, var_re, var_im


def binning_analysis(series, min_bins: int = 16) -> np.ndarray:
    """Standard error of the mean after successive pairwise binning.

    Returns an array of ``(bin_size, error)`` rows; a plateau signals that the
    bins have outgrown the autocorrelation time.
    """
    x = np.asarray(series, dtype=float)
    out = []
    size = 1
    while len(x) >= min_bins:
        out.append((size, x.std(ddof=1) / math.sqrt(len(x))))
        if len(x) % 2:
            x = x[:-1]
        x = 0.5 * (x[0::2] + x[1::2])
        size *= 2
    return np.array(out)


def integrated_autocorrelation_time(series, min_bins: int = 128) -> float:
    """``tau = (err_plateau / err_naive)**2 / 2`` from the binning ladder.

    The plateau is read at the coarsest level that still has ``min_bins`` bins,
    where the error estimate itself is good to about ``1/sqrt(2 min_bins)``.
    """
    b = binning_analysis(series, min_bins)
    if len(b) == 0 or b[0, 1] == 0:
        return 0.5
    return 0.5 * float((b[-1, 1] / b[0, 1]) ** 2)


# --------------------------------------------------------------------------
# hit matrices
# --------------------------------------------------------------------------

def _ensemble_parts(ensemble):
    samples = list(ensemble.samples if hasattr(ensemble, "samples") else ensemble)
    period = None
    if hasattr(ensemble, "period"):
        period = ensemble.period
    elif samples and isinstance(samples[0], LoopSet):
        period = samples[0].period
    spacing = getattr(ensemble, "lattice_spacing", None)
    return samples, period, spacing


@dataclass
class _Flat:
    verts: np.ndarray
    loop_off: np.ndarray
    sample_off: np.ndarray
    bbox: np.ndarray
    n_samples: int


def _flatten(samples) -> _Flat:
    verts, loop_off, sample_off, boxes = [], [0], [0], []
    for ls in samples:
        for lp in ls.loops:
            if not lp.trivial:
                continue
            verts.append(lp.vertices)
            loop_off.append(loop_off[-1] + len(lp.vertices))
            boxes.append(lp.bbox)
        sample_off.append(len(loop_off) - 1)
    v = np.concatenate(verts) if verts else np.zeros((0, 2))
    return _Flat(np.ascontiguousarray(v), np.array(loop_off, dtype=np.int64),
                 np.array(sample_off, dtype=np.int64),
                 np.array(boxes, dtype=float).reshape(-1, 4), len(samples))


def _profile(poly: np.ndarray, c: complex):
    """Polar-sorted copy of a star-shaped polygon about ``c``."""
    ang = np.arctan2(poly[:, 1] - c.imag, poly[:, 0] - c.real)
    start = int(np.argmin(ang))
    pts = np.roll(poly, -start, axis=0)
    a = np.unwrap(np.roll(ang, -start))
    if a[-1] < a[0]:  # clockwise polygon
        pts = np.roll(pts[::-1], 1, axis=0)
        a = np.unwrap(np.arctan2(pts[:, 1] - c.imag, pts[:, 0] - c.real))
    return a, pts


@njit(cache=True)
def _ray_radius(ang, pts, cx, cy, phi):
    K = ang.shape[0]
    a0 = ang[0]
    t = phi - a0
    t = t - 2 * np.pi * np.floor(t / (2 * np.pi))
    phi2 = a0 + t
    j = np.searchsorted(ang, phi2, side="right")
    i0 = j - 1
    i1 = j if j < K else 0
    px, py = pts[i0, 0] - cx, pts[i0, 1] - cy
    qx, qy = pts[i1, 0] - pts[i0, 0], pts[i1, 1] - pts[i0, 1]
    ux, uy = np.cos(phi), np.sin(phi)
    den = ux * qy - uy * qx
    if den == 0:
        return np.hypot(px, py)
    return (px * qy - py * qx) / den


@njit(cache=True)
def _between(pts, cx, cy, pcx, pcy, ang_in, pts_in, ang_out, pts_out):
    """Loop vertices measured from ``(cx, cy)``; probe polylines centered at ``(pcx, pcy)``."""
    for v in range(pts.shape[0]):
        dx, dy = pts[v, 0] - cx, pts[v, 1] - cy
        r = np.hypot(dx, dy)
        phi = np.arctan2(dy, dx)
        if not r > _ray_radius(ang_in, pts_in, pcx, pcy, phi):
            return False
        if not r < _ray_radius(ang_out, pts_out, pcx, pcy, phi):
            return False
    return True


@njit(cache=True)
def _hits_kernel(verts, loop_off, sample_off, bbox, centers, obox, ibox,
                 ang_in, pts_in, ang_out, pts_out, px, py, periodic, hits):
    S = sample_off.shape[0] - 1
    P = centers.shape[0]
    for s in range(S):
        for L in range(sample_off[s], sample_off[s + 1]):
            bx0, by0, bx1, by1 = bbox[L, 0], bbox[L, 1], bbox[L, 2], bbox[L, 3]
            w, h = bx1 - bx0, by1 - by0
            pts = verts[loop_off[L]:loop_off[L + 1]]
            for p in range(P):
                if hits[s, p]:
                    continue
                ox0, oy0, ox1, oy1 = obox[p, 0], obox[p, 1], obox[p, 2], obox[p, 3]
                ix0, iy0, ix1, iy1 = ibox[p, 0], ibox[p, 1], ibox[p, 2], ibox[p, 3]
                if w > ox1 - ox0 or h > oy1 - oy0 or w < ix1 - ix0 or h < iy1 - iy0:
                    continue
                if periodic:
                    i0 = int(np.ceil((ox0 - bx0) / px))
                    i1 = int(np.floor((ox1 - bx1) / px))
                    j0 = int(np.ceil((oy0 - by0) / py))
                    j1 = int(np.floor((oy1 - by1) / py))
                else:
                    i0, i1, j0, j1 = 0, 0, 0, 0
                for i in range(i0, i1 + 1):
                    for j in range(j0, j1 + 1):
                        dx, dy = i * px, j * py
                        if not (bx0 + dx >= ox0 and bx1 + dx <= ox1
                                and by0 + dy >= oy0 and by1 + dy <= oy1):
                            continue
                        if not (bx0 + dx <= ix0 and bx1 + dx >= ix1
                                and by0 + dy <= iy0 and by1 + dy >= iy1):
                            continue
                        cx, cy = centers[p, 0] - dx, centers[p, 1] - dy
                        if abs(winding_number(pts, cx, cy)) != 1:
                            continue
                        if _between(pts, cx, cy, centers[p, 0], centers[p, 1],
                                    ang_in[p], pts_in[p], ang_out[p], pts_out[p]):
                            hits[s, p] = 1


class ProbeSet:
    """A batch of probe annuli prepared for the hit kernel."""

    def __init__(self, regions: list[AnnularRegion]):
        if not regions:
            raise ValueError("empty probe set")
        K = max(max(len(r.inner), len(r.outer)) for r in regions)
        P = len(regions)
        self.regions = regions
        self.centers = np.array([[r.center.real, r.center.imag] for r in regions])
        self.obox = np.array([r._obox for r in regions], dtype=float)
        self.ibox = np.array([r._ibox for r in regions], dtype=float)
        self.ang_in = np.full((P, K), np.inf)
        self.ang_out = np.full((P, K), np.inf)
        self.pts_in = np.zeros((P, K, 2))
        self.pts_out = np.zeros((P, K, 2))
        for p, r in enumerate(regions):
            if len(r.inner) != K or len(r.outer) != K:
                raise ValueError("probe polylines in one set must share a sample count")
            a, q = _profile(r.inner, r.center)
            self.ang_in[p], self.pts_in[p] = a, q
            a, q = _profile(r.outer, r.center)
            self.ang_out[p], self.pts_out[p] = a, q

    def __len__(self) -> int:
        return len(self.regions)

    def hits(self, ensemble, flat: _Flat | None = None) -> np.ndarray:
        samples, period, _ = _ensemble_parts(ensemble)
        flat = flat if flat is not None else _flatten(samples)
        out = np.zeros((flat.n_samples, len(self)), dtype=np.uint8)
        px, py = (period if period is not None else (1.0, 1.0))
        _hits_kernel(flat.verts, flat.loop_off, flat.sample_off, flat.bbox, self.centers,
                     self.obox, self.ibox, self.ang_in, self.pts_in, self.ang_out, self.pts_out,
                     float(px), float(py), period is not None, out)
        return out


def hit_matrix(ensemble, regions: list[AnnularRegion]) -> np.ndarray:
    """``H[i, p] = indicator_I(sample_i, regions[p])``."""
    return ProbeSet(regions).hits(ensemble)


# --------------------------------------------------------------------------
# shape-variable estimators
# --------------------------------------------------------------------------

def _combine(est_fn, H_ens, H_ref, same, n_blocks):
    """Jackknife ``est_fn(mean_ens, mean_ref)`` over both ensembles."""
    if same:
        full, vr, vi = jackknife(H_ens, lambda m: est_fn(m, m), n_blocks)
        return full, vr, vi
    m_ref = H_ref.mean(axis=0)
    m_ens = H_ens.mean(axis=0)
    full, vr1, vi1 = jackknife(H_ens, lambda m: est_fn(m, m_ref), n_blocks)
    _, vr2, vi2 = jackknife(H_ref, lambda m: est_fn(m_ens, m), n_blocks)
    return full, vr1 + vr2, vi1 + vi2


def _is_same(a, b) -> bool:
    return a is b or (hasattr(a, "samples") and hasattr(b, "samples") and a.samples is b.samples)


def estimate_E_ratio(ensemble, reference, shape, delta: float = DEFAULT_DELTA,
                     n_blocks: int | None = 100) -> Estimate:
    """Mean winding indicator over ``ensemble`` divided by that over ``reference``."""
    region = shape if isinstance(shape, AnnularRegion) else annulus_of(shape, delta)
    probes = ProbeSet([region])
    H = probes.hits(ensemble).astype(float)
    same = _is_same(ensemble, reference)
    R = H if same else probes.hits(reference).astype(float)
    if len(H) == 0 or len(R) == 0:
        raise UndefinedEstimate("empty ensemble")
    if R.sum() == 0:
        raise UndefinedEstimate("reference ensemble has no winding loops for this probe")

    def ratio(me, mr):
        return me[0] / mr[0] if mr[0] > 0 else np.nan

    full, vr, _ = _combine(ratio, H, R, same, n_blocks)
    err = 0.0 if same else float(np.sqrt(vr))
    return Estimate(float(full), err, len(H), extra={"hits": int(H.sum()), "ref_hits": int(R.sum())})


def default_bins(k: int) -> int:
    return 64 if k == 2 else 32 * k


def _probe_shapes(w, k, eps, B, b, delta):
    """Annuli at theta_j = 2 pi j / B for one period ``2 pi / k``; the rest repeat."""
    per = B // k
    return [annulus_of(Hypotrochoid(k, complex(w), 2 * np.pi * j / B, eps, b), delta) for j in range(per)]


def _check_ladder(ladder, spacing):
    ladder = [float(e) for e in ladder]
    if any(a <= b for a, b in zip(ladder, ladder[1:])):
        raise ValueError("scale ladder must be strictly descending")
    if spacing is not None and min(ladder) < MIN_SCALE_IN_SPACINGS * spacing:
        raise ValueError(f"scale {min(ladder)} is below {MIN_SCALE_IN_SPACINGS:g} lattice spacings "
                         f"({MIN_SCALE_IN_SPACINGS * spacing:.4g})")
    return ladder


def binned_mode(ratios, s: int, eps: float, m: int = 1) -> complex:
    """``m!/(2 pi eps^s) (2 pi / B) sum_b e^{-i s theta_b} R_b`` over ``B`` equally spaced bins."""
    R = np.asarray(ratios)
    B = len(R)
    theta = 2 * np.pi * np.arange(B) / B
    return complex(math.factorial(m) / (2 * np.pi * eps**s) * (2 * np.pi / B)
                   * np.sum(np.exp(-1j * s * theta) * R))


def _mode_weights(k, m, eps, B):
    """Coefficients turning per-orientation ratios into the spin-km Fourier mode."""
    s = k * m
    per = B // k
    theta = 2 * np.pi * np.arange(B) / B
    coef = math.factorial(m) / (2 * np.pi * eps**s) * (2 * np.pi / B) * np.exp(-1j * s * theta)
    # fold the k repeated periods onto the distinct orientations
    return coef.reshape(k, per).sum(axis=0)


def _weighted_line(x, y, err):
    """Weighted fit ``y = A + B x``; returns ``(A, sigma_A, chi2_red)``."""
    x, y, err = map(np.asarray, (x, y, err))
    if len(x) == 1 or np.any(err <= 0):
        return float(y[-1]), float(err[-1]), float("nan")
    if len(x) == 2:
        wts = 1 / err**2
        A = float(np.sum(wts * y) / wts.sum())
        return A, float(1 / np.sqrt(wts.sum())), float("nan")
    X = np.column_stack([np.ones_like(x), x])
    W = np.diag(1 / err**2)
    cov = np.linalg.inv(X.T @ W @ X)
    beta = cov @ X.T @ W @ y
    res = (y - X @ beta) / err
    return float(beta[0]), float(np.sqrt(cov[0, 0])), float(res @ res / (len(x) - 2))


def _extrapolate(ladder, values, err_re, err_im):
    A_re, s_re, chi_re = _weighted_line(ladder, np.real(values), err_re)
    A_im, s_im, chi_im = _weighted_line(ladder, np.imag(values), err_im)
    return Estimate(complex(A_re, A_im), float(np.hypot(s_re, s_im)), 0, s_re, s_im,
                    extra={"chi2_red_re": chi_re, "chi2_red_im": chi_im, "model": "A + B*eps"})


@dataclass
class ModeResult:
    ladder: list
    values: list
    extrapolated: Estimate
    k: int
    m: int
    B: int


def estimate_T_mode(ensemble, reference, w, k: int = 2, m: int = 1, ladder=DEFAULT_LADDER,
                    delta: float = DEFAULT_DELTA, B: int | None = None, b: float = 2.0,
                    lattice_spacing: float | None = None, n_blocks: int | None = 100) -> ModeResult:
    """Spin-``k m`` Fourier mode of the shape ratio, per scale, plus an ``eps -> 0`` fit.

    At each ``eps`` the mode is ``m!/(2 pi eps^{km}) (2 pi / B) sum_b e^{-i km theta_b} R_b``
    with ``R_b`` the indicator ratio for the hypotrochoid at orientation ``theta_b``.
    """
    B = B or default_bins(k)
    if B % (4 * k):
        raise ValueError("bin count must be divisible by 4k")
    if m >= 1 and B < 8 * k * m:
        raise ValueError("bin count must be at least 8km")
    spacing = lattice_spacing
    if spacing is None:
        spacing = _ensemble_parts(ensemble)[2]
    ladder = _check_ladder(ladder, spacing)
    same = _is_same(ensemble, reference)
    flat_e = _flatten(_ensemble_parts(ensemble)[0])
    flat_r = flat_e if same else _flatten(_ensemble_parts(reference)[0])
    values = []
    for eps in ladder:
        probes = ProbeSet(_probe_shapes(w, k, eps, B, b, delta))
        H = probes.hits(ensemble, flat_e).astype(float)
        R = H if same else probes.hits(reference, flat_r).astype(float)
        if np.any(R.sum(axis=0) == 0):
            raise UndefinedEstimate(f"reference has orientations with no winding loops at eps={eps}")
        wts = _mode_weights(k, m, eps, B)

        def mode(me, mr, wts=wts):
            return np.sum(wts * me / mr)

        full, vr, vi = _combine(mode, H, R, same, n_blocks)
        values.append(Estimate(complex(full), float(np.sqrt(vr + vi)), len(H),
                               float(np.sqrt(vr)), float(np.sqrt(vi)), extra={"eps": eps}))
    ext = _extrapolate(ladder, [v.value for v in values], [v.error_re for v in values],
                       [v.error_im for v in values])
    ext.n_samples = values[0].n_samples
    return ModeResult(ladder, values, ext, k, m, B)


def estimate_two_point(ensemble, reference, w1, w2, k: int = 2, m: int = 1, ladder=DEFAULT_LADDER,
                       delta: float = DEFAULT_DELTA, B: int | None = None, b: float = 2.0,
                       lattice_spacing: float | None = None, n_blocks: int | None = 100) -> ModeResult:
    """Connected product ``<X Y> - <X><Y>`` of the per-sample modes at ``w1`` and ``w2``.

    ``X_i = sum_b c_b H_i(b, w1) / r_b`` with ``r_b`` the reference hit rate, so
    ``<X>`` is the mode of :func:`estimate_T_mode`.
    """
    B = B or default_bins(k)
    if B % (4 * k):
        raise ValueError("bin count must be divisible by 4k")
    spacing = lattice_spacing if lattice_spacing is not None else _ensemble_parts(ensemble)[2]
    ladder = _check_ladder(ladder, spacing)
    if abs(complex(w1) - complex(w2)) < 4 * max(ladder):
        raise ValueError("probe centers must be far apart compared with the largest scale")
    same = _is_same(ensemble, reference)
    flat_e = _flatten(_ensemble_parts(ensemble)[0])
    flat_r = flat_e if same else _flatten(_ensemble_parts(reference)[0])
    values = []
    for eps in ladder:
        per = B // k
        probes = ProbeSet(_probe_shapes(w1, k, eps, B, b, delta) + _probe_shapes(w2, k, eps, B, b, delta))
        H = probes.hits(ensemble, flat_e).astype(float)
        R = H if same else probes.hits(reference, flat_r).astype(float)
        if np.any(R.sum(axis=0) == 0):
            raise UndefinedEstimate(f"reference has orientations with no winding loops at eps={eps}")
        wts = _mode_weights(k, m, eps, B)
        H1, H2 = H[:, :per], H[:, per:]
        # per-sample columns: H1, H2, and all pairwise products H1_a * H2_b
        prod = (H1[:, :, None] * H2[:, None, :]).reshape(len(H), -1)
        data = np.hstack([H1, H2, prod])

        def connected(me, mr, wts=wts, per=per):
            r1, r2 = mr[:per], mr[per:2 * per]
            a1, a2 = wts / r1, wts / r2
            mx = np.sum(a1 * me[:per])
            my = np.sum(a2 * me[per:2 * per])
            mxy = a1 @ me[2 * per:].reshape(per, per) @ a2
            return mxy - mx * my

        def fn(me, mr):
            return connected(me, mr[: 2 * per])

        if same:
            full, vr, vi = jackknife(data, lambda mm: fn(mm, mm), n_blocks)
        else:
            m_ref = R.mean(axis=0)
            m_ens = data.mean(axis=0)
            full, vr, vi = jackknife(data, lambda mm: fn(mm, m_ref), n_blocks)
            _, vr2, vi2 = jackknife(R, lambda mr: fn(m_ens, mr), n_blocks)
            vr, vi = vr + vr2, vi + vi2
        values.append(Estimate(complex(full), float(np.sqrt(vr + vi)), len(H),
                               float(np.sqrt(vr)), float(np.sqrt(vi)), extra={"eps": eps}))
    ext = _extrapolate(ladder, [v.value for v in values], [v.error_re for v in values],
                       [v.error_im for v in values])
    ext.n_samples = values[0].n_samples
    return ModeResult(ladder, values, ext, k, m, B)


def cft_two_point(w1, w2, c: float) -> complex:
    """``(c/2) / (w1 - w2)**4``."""
    return (c / 2) / (complex(w1) - complex(w2)) ** 4


def estimate_rel_partition(ensemble_V, reference, shape, delta: float = DEFAULT_DELTA,
                           n_blocks: int | None = 100) -> Estimate:
    """``1 / E_ratio`` with the ratio measured in the domain-``V`` ensemble."""
    e = estimate_E_ratio(ensemble_V, reference, shape, delta, n_blocks)
    if e.value <= 0 or (e.error > 0 and e.value < 2 * e.error):
        raise UndefinedEstimate("shape ratio is consistent with zero; reciprocal undefined")
    return Estimate(1 / e.value, e.error / e.value**2, e.n_samples, extra={"E_ratio": e.value})


# --------------------------------------------------------------------------
# fits and lattice observables
# --------------------------------------------------------------------------

@dataclass
class PowerLawFit:
    exponent: float
    amplitude: float
    covariance: np.ndarray
    chi2_red: float
    exponent_error: float
    amplitude_error: float
    jackknife_error: float

    def __call__(self, x):
        return self.amplitude * np.asarray(x, dtype=float) ** self.exponent


def fit_power_law(x, y, yerr=None) -> PowerLawFit:
    """Weighted least squares of ``log y = log A + p log x``.

    With ``yerr`` the weights are ``(y / yerr)**2``; otherwise the fit is
    unweighted and the covariance is scaled by the residual variance.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y) or len(x) < 3:
        raise ValueError("need at least three (x, y) points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power-law fit needs positive data")
    lx, ly = np.log(x), np.log(y)
    sig = np.ones_like(ly) if yerr is None else np.asarray(yerr, dtype=float) / y
    if np.any(sig <= 0):
        raise ValueError("errors must be positive")

    def solve(lx, ly, sig):
        X = np.column_stack([np.ones_like(lx), lx])
        W = 1 / sig**2
        cov = np.linalg.inv(X.T @ (X * W[:, None]))
        beta = cov @ X.T @ (W * ly)
        return beta, cov

    beta, cov = solve(lx, ly, sig)
    res = (ly - beta[0] - beta[1] * lx) / sig
    dof = len(x) - 2
    chi2 = float(res @ res / dof) if dof > 0 else float("nan")
    if yerr is None and dof > 0:
        cov = cov * chi2
    jk = []
    for i in range(len(x)):
        keep = np.arange(len(x)) != i
        if keep.sum() >= 2:
            jk.append(solve(lx[keep], ly[keep], sig[keep])[0][1])
    jk = np.array(jk)
    jk_err = float(np.sqrt((len(jk) - 1) / len(jk) * np.sum((jk - jk.mean()) ** 2)))
    A = float(np.exp(beta[0]))
    return PowerLawFit(float(beta[1]), A, cov, chi2, float(np.sqrt(cov[1, 1])),
                       float(A * np.sqrt(cov[0, 0])), jk_err)


def fractal_dimension(loop, scales) -> PowerLawFit:
    """Box-counting fit; the dimension is ``-fit.exponent``."""
    from .loops import box_counts

    return fit_power_law(scales, box_counts(loop, scales))


def _spin_samples(configs, separations) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample ``<s_0 s_r>``, averaged over sites and the three lattice directions."""
    from .lattice import E, NE, NW

    lat = configs[0].lattice
    seps = np.asarray(separations, dtype=int)
    maps = [[lat.translate_index(d, int(r)) for d in (E, NE, NW)] for r in seps]
    per_sample = np.empty((len(configs), len(seps)))
    for i, cfg in enumerate(configs):
        s = cfg.spins.astype(np.float64)
        per_sample[i] = [np.mean([np.mean(s * s[t]) for t in ts]) for ts in maps]
    return seps, per_sample


def spin_two_point(configs, separations, n_blocks: int | None = 50):
    """Translation-averaged ``<s_0 s_r>`` along the three lattice directions.

    ``configs`` is a sequence of :class:`SpinConfig`. Returns ``(r, corr, err)``.
    """
    configs = list(configs)
    if not configs:
        raise ValueError("no configurations")
    seps, per_sample = _spin_samples(configs, separations)
    mean = per_sample.mean(axis=0)
    if len(configs) < 2:
        return seps, mean, np.full(len(seps), np.nan)
    _, var, _ = jackknife(per_sample, lambda m: m, n_blocks)
    return seps, mean, np.sqrt(var)


def binder_cumulant(magnetizations, n_blocks: int | None = 50) -> Estimate:
    """``U = 1 - <m^4> / (3 <m^2>^2)`` with a jackknife error."""
    m = np.asarray(magnetizations, dtype=float)
    data = np.column_stack([m**2, m**4])
    full, var, _ = jackknife(data, lambda mm: 1 - mm[1] / (3 * mm[0] ** 2), n_blocks)
    return Estimate(float(full), float(np.sqrt(var)), len(m))


def binder_crossing(K, U_by_size: dict, degree: int = 2) -> float:
    """Mean coupling where polynomial fits of ``U(K)`` for successive sizes intersect."""
    K = np.asarray(K, dtype=float)
    sizes = sorted(U_by_size)
    if len(sizes) < 2:
        raise ValueError("need at least two sizes")
    polys = {L: np.polynomial.Polynomial.fit(K, np.asarray(U_by_size[L], dtype=float), degree)
             for L in sizes}
    crossings = []
    for a, b in zip(sizes, sizes[1:]):
        roots = (polys[a] - polys[b]).roots()
        roots = [r.real for r in roots if abs(r.imag) < 1e-12 and K.min() <= r.real <= K.max()]
        if not roots:
            raise UndefinedEstimate(f"no crossing between L={a} and L={b} inside the scanned range")
        mid = 0.5 * (K.min() + K.max())
        crossings.append(min(roots, key=lambda r: abs(r - mid)))
    return float(np.mean(crossings))


def jackknife_error_scaling(draw, sizes, func=np.mean, n_blocks: int | None = 50) -> float:
    """Slope of ``log(jackknife error)`` against ``log N`` for samples from ``draw(N)``."""
    errs = []
    for n in sizes:
        data = np.asarray(draw(int(n)), dtype=float).reshape(int(n), -1)
        _, var, _ = jackknife(data, lambda m: func(m), n_blocks)
        errs.append(float(np.sqrt(np.sum(var))))
    return float(np.polyfit(np.log(sizes), np.log(errs), 1)[0])


def largest_loop_dimension(loopsets, scales, n_blocks: int | None = 50) -> Estimate:
    """Box-counting dimension of the longest loop in each sample.

    Counts are averaged over samples before the log-log fit; the error is a
    block jackknife over samples.
    """
    from .loops import box_counts

    scales = np.asarray(scales, dtype=float)
    counts = []
    for ls in loopsets:
        loops = ls.loops if hasattr(ls, "loops") else ls
        if not loops:
            continue
        big = max(loops, key=lambda lp: len(lp.vertices))
        counts.append(box_counts(big, scales))
    if len(counts) < 2:
        raise UndefinedEstimate("need at least two samples with loops")
    data = np.asarray(counts, dtype=float)
    full, var, _ = jackknife(data, lambda m: -fit_power_law(scales, m).exponent, n_blocks)
    return Estimate(float(full), float(np.sqrt(var)), len(data), extra={"scales": scales.tolist()})


def spin_exponent(configs, separations, n_blocks: int | None = 50,
                  finite_size: bool = True) -> Estimate:
    """Decay exponent ``p`` of ``<s_0 s_r> ~ r^-p``, jackknifed over samples.

    On a periodic ``L x L`` lattice the energy operator has a nonzero mean of
    order ``1/L``, which multiplies the correlator by ``1 + a r/L``. With
    ``finite_size`` the log-log fit carries that linear term as a nuisance
    parameter; without it the fit is a bare power law.
    """
    configs = list(configs)
    if len(configs) < 2:
        raise UndefinedEstimate("need at least two configurations")
    r, per = _spin_samples(configs, separations)
    lat = configs[0].lattice
    L = min(lat.Lx, lat.Ly)
    cols = [np.ones(len(r)), -np.log(r)] + ([r / L] if finite_size else [])
    X = np.column_stack(cols)
    if len(r) <= X.shape[1]:
        raise UndefinedEstimate(f"need more than {X.shape[1]} separations")

    def expo(m):
        if np.any(m <= 0):
            return np.nan
        return np.linalg.lstsq(X, np.log(m), rcond=None)[0][1]

    full, var, _ = jackknife(per, expo, n_blocks)
    if not np.isfinite(full):
        raise UndefinedEstimate("correlator not positive at every separation")
    return Estimate(float(full), float(np.sqrt(var)), len(per),
                    extra={"separations": r.tolist(), "corr": per.mean(axis=0).tolist(),
                           "finite_size": finite_size})
