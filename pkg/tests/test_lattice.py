import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clelab.lattice import (
    E, NE, NW, W, SW, SE,
    LoopModelConfig,
    ModelParams,
    SpinConfig,
    build_lattice,
    c_to_kappa_dilute,
    count_loops,
    critical_x,
    ising_energy,
    kappa_to_c,
    loop_model_weight,
)


@pytest.mark.parametrize("dims,counts", [((2, 2), (4, 12, 8)), ((4, 4), (16, 48, 32)), ((6, 4), (24, 72, 48))])
def test_counts(dims, counts):
    lat = build_lattice(*dims)
    assert (lat.n_faces, lat.n_edges, lat.n_vertices) == counts


@pytest.mark.parametrize("dims", [(3, 4), (4, 5), (0, 2), (1, 1)])
def test_rejects_bad_dims(dims):
    with pytest.raises(ValueError):
        build_lattice(*dims)


@pytest.mark.parametrize("dims", [(2, 2), (4, 4), (8, 6), (10, 12)])
def test_incidence_structure(dims):
    lat = build_lattice(*dims)
    deg = np.bincount(lat.edge_verts.ravel(), minlength=lat.n_vertices)
    assert np.all(deg == 3)
    for f in range(lat.n_faces):
        assert len(set(lat.face_edges[f])) == 6
        for k in range(6):
            e = lat.face_edges[f, k]
            assert set(lat.edge_faces[e]) == {f, lat.face_nbr[f, k]}
            assert set(lat.edge_verts[e]) == {lat.face_verts[f, k - 1], lat.face_verts[f, k]}
    # opposite slots are inverse maps
    for a, b in [(E, W), (NE, SW), (NW, SE)]:
        assert np.array_equal(lat.face_nbr[lat.face_nbr[:, a], b], np.arange(lat.n_faces))


def test_face_coordinates_in_window():
    lat = build_lattice(8, 8)
    px, py = lat.period
    assert np.all(lat.face_xy >= 0)
    assert np.all(lat.face_xy[:, 0] < px) and np.all(lat.face_xy[:, 1] < py)
    assert px == pytest.approx(1.0)
    # nearest-neighbour distance is one lattice spacing
    d = lat.face_xy[lat.face_nbr[0, E]] - lat.face_xy[0]
    assert np.hypot(*d) == pytest.approx(lat.spacing)


def test_energy_examples():
    lat = build_lattice(4, 4)
    up = SpinConfig.uniform(lat)
    assert ising_energy(up, -1.0, 0.0) == -48
    assert ising_energy(up, 0.0, 1.0) == -16
    one = up.copy()
    one.spins[5] = -1
    assert ising_energy(one, -1.0, 0.0) - ising_energy(up, -1.0, 0.0) == 12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), J=st.floats(-2, 2), h=st.floats(-1, 1), f=st.integers(0, 47))
def test_single_flip_energy_delta(seed, J, h, f):
    lat = build_lattice(8, 6)
    cfg = SpinConfig.random(lat, np.random.default_rng(seed))
    s = int(cfg.spins[f])
    S = int(cfg.spins[lat.face_nbr[f]].sum())
    before = ising_energy(cfg, J, h)
    cfg.spins[f] = -s
    assert ising_energy(cfg, J, h) - before == pytest.approx(-2 * J * s * S + 2 * h * s, abs=1e-9)


def test_spin_validation():
    lat = build_lattice(2, 2)
    with pytest.raises(ValueError):
        SpinConfig(lat, np.array([1, 0, 1, 1], dtype=np.int8))
    with pytest.raises(ValueError):
        SpinConfig(lat, np.ones(3, dtype=np.int8))


def test_loop_weight_examples():
    lat = build_lattice(6, 6)
    assert loop_model_weight(LoopModelConfig.empty(lat), 0.3, 1.7) == 1.0
    hexa = LoopModelConfig.from_faces(lat, [0])
    assert loop_model_weight(hexa, 0.5, 1.0) == 0.015625
    two = LoopModelConfig.from_faces(lat, [lat.face_index(0, 0), lat.face_index(3, 3)])
    assert count_loops(two) == 2
    assert loop_model_weight(two, 0.4, 1.3) == pytest.approx(0.4**12 * 1.3**2)


def test_loop_constraint_enforced():
    lat = build_lattice(4, 4)
    occ = np.zeros(lat.n_edges, dtype=np.uint8)
    occ[0] = 1
    with pytest.raises(ValueError):
        LoopModelConfig(lat, occ)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 63), max_size=20))
def test_face_xor_preserves_constraint(faces):
    lat = build_lattice(8, 8)
    cfg = LoopModelConfig.from_faces(lat, faces)
    deg = np.zeros(lat.n_vertices, dtype=int)
    np.add.at(deg, lat.edge_verts[cfg.occupied.astype(bool)].ravel(), 1)
    assert set(np.unique(deg)) <= {0, 2}


def test_domain_walls_from_spins():
    lat = build_lattice(8, 8)
    cfg = SpinConfig.uniform(lat)
    cfg.spins[lat.face_index(3, 3)] = -1
    walls = LoopModelConfig.from_spins(cfg)
    assert walls.n_occupied == 6 and count_loops(walls) == 1


def test_model_params():
    p = ModelParams(J=-1, h=0, T=2.0, m=0.5)
    assert p.x == pytest.approx(math.exp(-0.5))
    assert p.n == pytest.approx(p.x ** p.m)
    assert ModelParams.ising(0.3).K == pytest.approx(0.3)
    q = ModelParams.loop_gas(0.6, 1.5)
    assert (q.x, q.n) == (pytest.approx(0.6), pytest.approx(1.5))
    with pytest.raises(ValueError):
        ModelParams(T=0.0)


def _bisect(fun, lo, hi):
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if fun(lo) * fun(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


@pytest.mark.parametrize("n,expected", [(1.0, 0.5773503), (2.0, 0.7071068), (0.0, 0.5411961)])
def test_critical_x(n, expected):
    oracle = _bisect(lambda x: x * math.sqrt(2 + math.sqrt(2 - n)) - 1, 0.1, 1.0)
    assert critical_x(n) == pytest.approx(oracle, abs=1e-12)
    assert critical_x(n) == pytest.approx(expected, abs=1e-7)


@pytest.mark.parametrize("n", [-0.1, 2.01])
def test_critical_x_domain(n):
    with pytest.raises(ValueError):
        critical_x(n)


def test_kappa_c():
    assert kappa_to_c(8 / 3) == pytest.approx(0, abs=1e-15)
    assert kappa_to_c(3) == pytest.approx(0.5)
    assert kappa_to_c(4) == pytest.approx(1.0)
    assert kappa_to_c(6) == pytest.approx(0, abs=1e-15)
    with pytest.raises(ValueError):
        kappa_to_c(2.0)
    assert c_to_kappa_dilute(0.5) == pytest.approx(3.0, abs=1e-12)
    assert c_to_kappa_dilute(0.0) == pytest.approx(8 / 3, abs=1e-12)
    with pytest.raises(ValueError):
        c_to_kappa_dilute(1.2)


@pytest.mark.parametrize("c", [i / 10 for i in range(11)])
def test_kappa_round_trip(c):
    k = c_to_kappa_dilute(c)
    assert 8 / 3 - 1e-12 <= k <= 4 + 1e-12
    assert kappa_to_c(k) == pytest.approx(c, abs=1e-12)
