import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clelab.conformal import Circle, Hypotrochoid, annulus_of
from clelab.ensemble import LoopEnsemble
from clelab.estimators import (
    UndefinedEstimate,
    binder_crossing,
    binder_cumulant,
    binned_mode,
    binning_analysis,
    estimate_E_ratio,
    estimate_rel_partition,
    estimate_T_mode,
    estimate_two_point,
    fit_power_law,
    hit_matrix,
    integrated_autocorrelation_time,
    jackknife,
    jackknife_error_scaling,
    largest_loop_dimension,
    spin_exponent,
    spin_two_point,
    _spin_samples,
)
from clelab.lattice import SpinConfig, build_lattice
from clelab.loops import Loop, LoopSet, indicator_I

from synthetic import PLANT_B, PLANT_DELTA, circle_ensemble, planted_mode_ensemble

W = 0.5 + 0.5j
RING = Circle(W, 0.5)  # with delta = 0.2 the annulus spans radii (0.45, 0.55)


def test_hit_matrix_matches_indicator_oracle():
    rng = np.random.default_rng(0)
    centers = [0.5 + 0.5j, 0.95 + 0.05j]
    samples = []
    for _ in range(300):
        loops = []
        for c in centers:
            cc = c + complex(*rng.normal(0, 0.01, 2)) + complex(rng.integers(-1, 2), rng.integers(-1, 2))
            h = Hypotrochoid(2, cc, rng.uniform(0, 1), rng.uniform(0.08, 0.12), 2.0)
            loops.append(Loop(h.polyline(int(rng.integers(20, 80)))))
        samples.append(LoopSet(loops, (1.0, 1.0)))
    regions = [annulus_of(Hypotrochoid(2, c, th, 0.1, 2.0), 0.2) for c in centers
               for th in np.linspace(0, 1, 6)]
    H = hit_matrix(samples, regions)
    oracle = np.array([[indicator_I(s, r) for r in regions] for s in samples])
    assert H.sum() > 50
    assert np.array_equal(H, oracle)


def test_E_ratio_self_reference():
    ens = circle_ensemble(500, np.random.default_rng(1))
    e = estimate_E_ratio(ens, ens, RING, 0.2)
    assert e.value == 1.0 and e.error == 0.0


def test_E_ratio_circle_probability():
    rng = np.random.default_rng(2)
    ens, ref = circle_ensemble(20000, rng), circle_ensemble(20000, rng)
    H = hit_matrix(ens, [annulus_of(RING, 0.2)])
    mean = H.mean()
    assert abs(mean - 0.15) < 3 * math.sqrt(0.15 * 0.85 / len(ens))
    e = estimate_E_ratio(ens, ref, RING, 0.2)
    assert abs(e.value - 1.0) < 2 * e.error


def test_E_ratio_planted_double():
    rng = np.random.default_rng(3)
    ens, ref = circle_ensemble(20000, rng, p=0.6), circle_ensemble(20000, rng, p=0.3)
    e = estimate_E_ratio(ens, ref, RING, 0.2)
    assert abs(e.value - 2.0) < 2 * e.error
    assert e.error < 0.1


def test_E_ratio_zero_reference():
    rng = np.random.default_rng(4)
    with pytest.raises(UndefinedEstimate):
        estimate_E_ratio(circle_ensemble(50, rng), circle_ensemble(50, rng, p=0.0), RING, 0.2)


def test_E_ratio_permutation_invariant():
    rng = np.random.default_rng(5)
    ens, ref = circle_ensemble(2000, rng), circle_ensemble(2000, rng)
    a = estimate_E_ratio(ens, ref, RING, 0.2)
    perm = [ens[i] for i in rng.permutation(len(ens))]
    b = estimate_E_ratio(perm, ref, RING, 0.2)
    assert a.value == b.value


def test_binned_mode_normalisation():
    R = np.full(64, 1.3)
    assert binned_mode(R, 0, 0.1, m=0) == pytest.approx(1.3)
    theta = 2 * np.pi * np.arange(64) / 64
    assert binned_mode(1 + 2 * 0.7 * 0.01 * np.cos(2 * theta), 2, 0.1) == pytest.approx(0.7)


@settings(max_examples=40, deadline=None)
@given(k=st.integers(2, 5), data=st.data())
def test_modes_not_divisible_by_k_vanish(k, data):
    per = 8
    base = np.array(data.draw(st.lists(st.floats(0, 2), min_size=per, max_size=per)))
    R = np.tile(base, k)  # exact k-fold symmetry
    s = data.draw(st.integers(1, 3 * k).filter(lambda s: s % k))
    assert abs(binned_mode(R, s, 1.0)) < 1e-12 * max(1.0, np.abs(R).sum())


def _plant(n, seed, amp=0.0, centers=(0j,), ladder=(0.2, 0.14, 0.1), latent_amp=0.0):
    return planted_mode_ensemble(n, np.random.default_rng(seed), list(centers), list(ladder),
                                 amp=amp, latent_amp=latent_amp)


def test_planted_orientation_bins_are_resolved():
    # one planted loop per sample hits its own orientation bin only
    ens = _plant(200, 6)
    from clelab.estimators import _probe_shapes
    for eps in (0.2, 0.1):
        regions = _probe_shapes(0j, 2, eps, 64, PLANT_B, PLANT_DELTA)
        H = hit_matrix(ens, regions)
        assert H.sum(axis=1).max() == 1
        assert H.sum() > 100


def test_rotation_invariant_mode_vanishes():
    ens, ref = _plant(20000, 7), _plant(20000, 8)
    res = estimate_T_mode(ens, ref, 0j, ladder=[0.2, 0.14, 0.1], delta=PLANT_DELTA, b=PLANT_B)
    for v in res.values:
        assert abs(v.real) < 3 * v.error_re and abs(v.imag) < 3 * v.error_im
    x = res.extrapolated
    assert abs(x.real) < 3 * x.error_re and abs(x.imag) < 3 * x.error_im


def test_planted_mode_recovered():
    A = 4.0
    ens, ref = _plant(30000, 9, amp=A), _plant(30000, 10)
    res = estimate_T_mode(ens, ref, 0j, ladder=[0.2, 0.14, 0.1], delta=PLANT_DELTA, b=PLANT_B)
    v = res.values[0]
    assert abs(v.real - A) < 2 * v.error_re
    x = res.extrapolated
    assert abs(x.real - A) < 2 * x.error_re


def test_planted_complex_mode():
    A = 3.0 - 2.0j
    ens = _plant(30000, 11, amp=A, ladder=(0.2,))
    ref = _plant(30000, 12, ladder=(0.2,))
    v = estimate_T_mode(ens, ref, 0j, ladder=[0.2], delta=PLANT_DELTA, b=PLANT_B).values[0]
    assert abs(v.real - A.real) < 2 * v.error_re
    assert abs(v.imag - A.imag) < 2 * v.error_im


def test_zeroth_mode_is_mean_ratio():
    ens, ref = _plant(3000, 13, amp=2.0, ladder=(0.2,)), _plant(3000, 14, ladder=(0.2,))
    res = estimate_T_mode(ens, ref, 0j, m=0, ladder=[0.2], delta=PLANT_DELTA, b=PLANT_B)
    ratios = [estimate_E_ratio(ens, ref, Hypotrochoid(2, 0j, 2 * np.pi * j / 64, 0.2, PLANT_B),
                               PLANT_DELTA).value for j in range(32)]
    assert res.values[0].value == pytest.approx(np.mean(ratios), rel=1e-12)


def test_mode_input_validation():
    ens = _plant(100, 15)
    with pytest.raises(ValueError):
        estimate_T_mode(ens, ens, 0j, B=60)
    with pytest.raises(ValueError):
        estimate_T_mode(ens, ens, 0j, ladder=[0.1, 0.2])
    with pytest.raises(ValueError):
        estimate_T_mode(ens, ens, 0j, ladder=[0.2, 0.04], lattice_spacing=0.01)


def test_ladder_checked_against_ensemble_spacing():
    ens = LoopEnsemble(_plant(50, 16), {"lattice_spacing": 1 / 64})
    with pytest.raises(ValueError):
        estimate_T_mode(ens, ens, 0j, ladder=[0.2, 0.05])


CENTERS = (0j, 3 + 0j)


def test_two_point_independent_is_zero():
    ens = _plant(30000, 17, centers=CENTERS, ladder=(0.2,))
    ref = _plant(30000, 18, centers=CENTERS, ladder=(0.2,))
    v = estimate_two_point(ens, ref, *CENTERS, ladder=[0.2], delta=PLANT_DELTA, b=PLANT_B).values[0]
    assert abs(v.real) < 3 * v.error_re and abs(v.imag) < 3 * v.error_im


def test_two_point_planted_covariance():
    a = 4.0
    ens = _plant(40000, 19, centers=CENTERS, ladder=(0.2,), latent_amp=a)
    ref = _plant(40000, 20, centers=CENTERS, ladder=(0.2,))
    v = estimate_two_point(ens, ref, *CENTERS, ladder=[0.2], delta=PLANT_DELTA, b=PLANT_B).values[0]
    assert abs(v.real - a**2) < 2 * v.error_re
    assert v.error_re < 0.5 * a**2


def test_two_point_constant_probe_exactly_zero():
    # a probe whose hits do not vary across samples carries no covariance
    ens = _plant(500, 21, centers=(0j,), ladder=(0.2,))
    fixed = Loop(Hypotrochoid(2, 3 + 0j, 0.0, 0.2, PLANT_B).polyline(96))
    ens = [LoopSet(ls.loops + [fixed]) for ls in ens]
    ref = _plant(500, 22, centers=CENTERS, ladder=(0.2,))
    v = estimate_two_point(ens, ref, *CENTERS, ladder=[0.2], delta=PLANT_DELTA, b=PLANT_B).values[0]
    assert abs(v.value) < 1e-12 * 1e4


def test_two_point_rejects_close_centers():
    ens = _plant(10, 23)
    with pytest.raises(ValueError):
        estimate_two_point(ens, ens, 0j, 0.3 + 0j, ladder=[0.2])


def test_rel_partition():
    rng = np.random.default_rng(24)
    ens = circle_ensemble(5000, rng)
    assert estimate_rel_partition(ens, ens, RING, 0.2).value == 1.0
    V, ref = circle_ensemble(20000, rng, p=0.15), circle_ensemble(20000, rng, p=0.3)
    z = estimate_rel_partition(V, ref, RING, 0.2)
    assert abs(z.value - 2.0) < 2 * z.error
    with pytest.raises(UndefinedEstimate):
        estimate_rel_partition(circle_ensemble(2000, rng, p=0.001), ref, RING, 0.2)


def _rotate(samples, phi):
    rot = np.array([[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]])
    return [LoopSet([Loop(lp.vertices @ rot.T) for lp in ls]) for ls in samples]


def test_rel_partition_rotation_invariant():
    rng = np.random.default_rng(25)
    V = _plant(4000, 26, amp=3.0, ladder=(0.2,))
    ref = _plant(4000, 27, ladder=(0.2,))
    u = Hypotrochoid(2, 0j, 0.0, 0.2, PLANT_B)
    phi = 2 * np.pi * 5 / 64
    z0 = estimate_rel_partition(V, ref, u, PLANT_DELTA)
    z1 = estimate_rel_partition(_rotate(V, phi), _rotate(ref, phi), u.with_theta(phi), PLANT_DELTA)
    assert abs(z0.value - z1.value) < z0.error


def test_fit_exact_power():
    x = np.array([1, 2, 4, 8, 16.0])
    f = fit_power_law(x, 3 * x**2)
    assert f.exponent == pytest.approx(2.0, abs=1e-12)
    assert f.amplitude == pytest.approx(3.0, rel=1e-12)


def test_fit_noisy_power():
    rng = np.random.default_rng(28)
    x = np.geomspace(1, 100, 12)
    y = 2.0 * x**1.5 * (1 + 0.05 * rng.normal(size=x.size))
    f = fit_power_law(x, y, 0.05 * y)
    assert abs(f.exponent - 1.5) < 2 * f.exponent_error


def test_fit_rejects_bad_data():
    with pytest.raises(ValueError):
        fit_power_law([1, 2, 3], [1, -1, 2])
    with pytest.raises(ValueError):
        fit_power_law([1, 2], [1, 2])


def test_jackknife_mean_matches_standard_error():
    x = np.random.default_rng(29).normal(size=1000)
    est, var, _ = jackknife(x[:, None], lambda m: m[0], n_blocks=None)
    assert est == pytest.approx(x.mean())
    assert math.sqrt(var) == pytest.approx(x.std(ddof=1) / math.sqrt(1000), rel=1e-10)


def test_jackknife_error_scaling():
    rng = np.random.default_rng(30)
    slope = jackknife_error_scaling(lambda n: rng.random(n) < 0.3, [1000, 4000, 16000, 64000, 256000])
    assert abs(slope + 0.5) < 0.05


def test_binning_detects_correlation():
    rng = np.random.default_rng(31)
    x = np.zeros(2**15)
    for i in range(1, len(x)):
        x[i] = 0.9 * x[i - 1] + rng.normal()
    b = binning_analysis(x)
    assert b[-1, 1] > 3 * b[0, 1]
    tau = integrated_autocorrelation_time(x)
    assert 5 < tau < 15  # exact value (1 + 0.9)/(2 (1 - 0.9)) = 9.5


def test_spin_two_point_limits():
    lat = build_lattice(32, 32)
    r, c, e = spin_two_point([SpinConfig.uniform(lat)] * 3, [1, 5, 8])
    assert np.all(c == 1.0)
    rng = np.random.default_rng(32)
    hot = [SpinConfig.random(lat, rng) for _ in range(200)]
    r, c, e = spin_two_point(hot, [1, 5, 8])
    assert np.all(np.abs(c) < 3 * e)


def test_binder_cumulant_limits():
    assert binder_cumulant(np.ones(100) * 0.8).value == pytest.approx(2 / 3)
    g = np.random.default_rng(33).normal(size=200000)
    assert binder_cumulant(g).value == pytest.approx(0.0, abs=0.02)


def test_binder_crossing_synthetic():
    K = np.linspace(0.25, 0.30, 11)
    Kc = 0.2747
    U = {L: 0.6 + 0.3 * np.tanh((K - Kc) * L) for L in (16, 32, 64)}
    assert binder_crossing(K, U, degree=3) == pytest.approx(Kc, abs=1e-3)


def test_largest_loop_dimension_of_smooth_curves_is_one():
    rng = np.random.default_rng(21)
    t = np.linspace(0, 2 * np.pi, 4000, endpoint=False)
    samples = []
    for _ in range(40):
        r = rng.uniform(0.25, 0.35)
        big = Loop(np.column_stack([0.5 + r * np.cos(t), 0.5 + r * np.sin(t)]))
        small = Loop(np.column_stack([0.5 + 0.05 * np.cos(t[::40]), 0.5 + 0.05 * np.sin(t[::40])]))
        samples.append(LoopSet([small, big], parent=np.array([1, -1])))
    est = largest_loop_dimension(samples, [0.1, 0.07, 0.05, 0.035, 0.025, 0.0175], n_blocks=20)
    assert abs(est.value - 1.0) < 0.05


def test_largest_loop_dimension_needs_loops():
    with pytest.raises(UndefinedEstimate):
        largest_loop_dimension([LoopSet([], parent=np.array([], dtype=int))] * 3, [0.1, 0.05])


def _spin_configs(L, n, seed):
    lat = build_lattice(L, L)
    rng = np.random.default_rng(seed)
    return [SpinConfig(lat, rng.choice(np.array([-1, 1], dtype=np.int8), lat.n_faces))
            for _ in range(n)]


def test_spin_exponent_ordered_phase_is_zero():
    lat = build_lattice(16, 16)
    cfgs = [SpinConfig(lat, np.full(lat.n_faces, s, dtype=np.int8)) for s in (1, -1, 1, 1)]
    for fs in (True, False):
        est = spin_exponent(cfgs, [1, 2, 3, 4, 6], n_blocks=None, finite_size=fs)
        assert abs(est.value) < 1e-12


def test_spin_exponent_plain_fit_matches_power_law_fit():
    # ordered configurations mixed with noise keep the mean correlator positive
    lat = build_lattice(32, 32)
    r = np.array([1, 2, 3, 4, 6, 8])
    cfgs = [SpinConfig(lat, np.ones(lat.n_faces, dtype=np.int8))] * 3 + _spin_configs(32, 3, 0)
    seps, per = _spin_samples(cfgs, r)
    mean = per.mean(axis=0)
    assert np.all(mean > 0)
    plain = spin_exponent(cfgs, r, n_blocks=None, finite_size=False).value
    assert plain == pytest.approx(-fit_power_law(seps, mean).exponent, rel=1e-9, abs=1e-12)
    assert plain != 0


def test_spin_exponent_rejects_nonpositive_and_short_input():
    cfgs = _spin_configs(16, 6, 1)
    with pytest.raises(UndefinedEstimate):
        spin_exponent(cfgs[:1], [1, 2, 3])
    with pytest.raises(UndefinedEstimate):
        spin_exponent(cfgs, [1, 2, 3], finite_size=True)
    lat = build_lattice(16, 16)
    stripes = np.where((np.arange(lat.n_faces) % 16) % 2 == 0, 1, -1).astype(np.int8)
    with pytest.raises(UndefinedEstimate, match="not positive"):
        spin_exponent([SpinConfig(lat, stripes)] * 4, [1, 2, 3, 4, 5], n_blocks=None)
