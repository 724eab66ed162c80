"""Markov-chain samplers for the honeycomb Ising model and the O(n) loop gas.

Three update kernels are provided:

* single-face Metropolis for the Ising measure ``exp(-H/T)``;
* Wolff clusters for ``h == 0`` (ferromagnetic coupling);
* hexagon face flips for the loop gas ``x**ell * n**N``; toggling the six
  edges of a face keeps every vertex at degree 0 or 2.

All randomness comes from a xoshiro256** state owned by the chain
(:mod:`clelab.rng`), so ``(seed, chain_id)`` fixes the stream bit for bit and
a checkpoint is just the configuration plus four state words.
"""

from __future__ import annotations

import base64
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .lattice import (
    HoneycombLattice,
    LoopModelConfig,
    ModelParams,
    SpinConfig,
    build_lattice,
    ising_energy,
)
from .rng import GENERATOR_NAME, Rng, next_below, next_double

CHECKPOINT_FORMAT = "clelab-checkpoint/1"
ENERGY_CHECK_INTERVAL = 1000


# --------------------------------------------------------------------------
# kernels
# --------------------------------------------------------------------------

@njit(cache=True)
def _metropolis_kernel(spins, nbr, J, h, T, state, nsweeps):
    N = spins.shape[0]
    # acceptance table indexed by (spin, neighbour sum + 6)
    table = np.ones((2, 13))
    for si in range(2):
        s = 1.0 if si == 1 else -1.0
        for S in range(-6, 7):
            dH = -2.0 * J * s * S + 2.0 * h * s
            if dH > 0:
                table[si, S + 6] = math.exp(-dH / T)
    accepted = 0
    dE = 0.0
    dM = 0
    for _ in range(nsweeps):
        for _ in range(N):
            f = next_below(state, N)
            s = spins[f]
            S = 0
            for k in range(6):
                S += spins[nbr[f, k]]
            p = table[1 if s > 0 else 0, S + 6]
            if p >= 1.0 or next_double(state) < p:
                spins[f] = -s
                accepted += 1
                dE += -2.0 * J * s * S + 2.0 * h * s
                dM -= 2 * s
    return accepted, dE, dM


@njit(cache=True)
def _wolff_kernel(spins, nbr, J, p_add, state, stack, flag, min_flips, max_clusters):
    """Grow and flip clusters until ``min_flips`` faces flipped (or ``max_clusters`` built)."""
    N = spins.shape[0]
    flipped = 0
    clusters = 0
    dE = 0.0
    dM = 0
    last_size = 0
    while flipped < min_flips and clusters < max_clusters:
        seed = next_below(state, N)
        s0 = spins[seed]
        stack[0] = seed
        flag[seed] = True
        top = 1
        size = 0
        while top > 0:
            top -= 1
            f = stack[top]
            stack[N + size] = f
            size += 1
            for k in range(6):
                g = nbr[f, k]
                if spins[g] == s0 and not flag[g]:
                    if p_add >= 1.0 or next_double(state) < p_add:
                        flag[g] = True
                        stack[top] = g
                        top += 1
        for c in range(size):
            f = stack[N + c]
            for k in range(6):
                g = nbr[f, k]
                if not flag[g]:
                    dE += -2.0 * J * spins[f] * spins[g]
        for c in range(size):
            f = stack[N + c]
            spins[f] = -s0
            flag[f] = False
        dM -= 2 * s0 * size
        flipped += size
        clusters += 1
        last_size = size
    return clusters, flipped, dE, dM, last_size


@njit(cache=True)
def _trace_count(occ, edge_verts, vert_edges, start_verts, stamp, mark):
    """Count distinct loops through any of ``start_verts``; walks each loop fully."""
    count = 0
    for v0 in start_verts:
        for k in range(3):
            g = vert_edges[v0, k]
            if occ[g] == 0 or stamp[g] == mark:
                continue
            count += 1
            e = g
            v = edge_verts[g, 1]
            while True:
                stamp[e] = mark
                nxt = -1
                for q in range(3):
                    c = vert_edges[v, q]
                    if c != e and occ[c] != 0:
                        nxt = c
                        break
                if nxt == g or nxt < 0:
                    break
                e = nxt
                v = edge_verts[e, 1] if edge_verts[e, 0] == v else edge_verts[e, 0]
    return count


@njit(cache=True)
def _loop_gas_kernel(occ, face_edges, face_verts, edge_verts, vert_edges, x, n, state,
                     nprop, stamp, mark, forced_face):
    N = face_edges.shape[0]
    accepted = 0
    dl_tot = 0
    dN_tot = 0
    last_ratio = 0.0
    trace = n != 1.0
    for _ in range(nprop):
        f = forced_face if forced_face >= 0 else next_below(state, N)
        k = 0
        for q in range(6):
            k += occ[face_edges[f, q]]
        dl = 6 - 2 * k
        before = 0
        if trace:
            mark[0] += 1
            before = _trace_count(occ, edge_verts, vert_edges, face_verts[f], stamp, mark[0])
        for q in range(6):
            occ[face_edges[f, q]] ^= 1
        dN = 0
        if trace:
            mark[0] += 1
            dN = _trace_count(occ, edge_verts, vert_edges, face_verts[f], stamp, mark[0]) - before
        ratio = x ** dl * n ** dN
        last_ratio = ratio
        if ratio >= 1.0 or next_double(state) < ratio:
            accepted += 1
            dl_tot += dl
            dN_tot += dN
        else:
            for q in range(6):
                occ[face_edges[f, q]] ^= 1
    return accepted, dl_tot, dN_tot, last_ratio


@njit(cache=True)
def _count_all_loops(occ, edge_verts, vert_edges):
    stamp = np.zeros(occ.shape[0], dtype=np.int64)
    nv = vert_edges.shape[0]
    return _trace_count(occ, edge_verts, vert_edges, np.arange(nv), stamp, 1)


# --------------------------------------------------------------------------
# single-update API
# --------------------------------------------------------------------------

def metropolis_sweep(config: SpinConfig, params: ModelParams, rng: Rng, sweeps: int = 1,
                     return_accepted: bool = False):
    """One (or ``sweeps``) pass of N random-face Metropolis proposals, in place."""
    acc, _, _ = _metropolis_kernel(config.spins, config.lattice.face_nbr, float(params.J),
                                   float(params.h), float(params.T), rng.state, sweeps)
    return (config, acc) if return_accepted else config


def _wolff_p_add(params: ModelParams) -> float:
    if params.h != 0:
        raise ValueError("Wolff clusters require h == 0")
    if params.J > 0:
        raise ValueError("Wolff clusters require a ferromagnetic coupling (J <= 0)")
    return -math.expm1(-2.0 * abs(params.J) / params.T)


def wolff_update(config: SpinConfig, params: ModelParams, rng: Rng, return_size: bool = False):
    """Grow one Wolff cluster with ``p_add = 1 - exp(-2|J|/T)`` and flip it, in place."""
    p = _wolff_p_add(params)
    N = config.lattice.n_faces
    stack = np.empty(2 * N, dtype=np.int64)
    flag = np.zeros(N, dtype=np.bool_)
    _, size, _, _, _ = _wolff_kernel(config.spins, config.lattice.face_nbr, float(params.J), p,
                                     rng.state, stack, flag, 1, 1)
    return (config, size) if return_size else config


def loop_gas_sweep(config: LoopModelConfig, x: float, n: float, rng: Rng, sweeps: int = 1,
                   face: int | None = None, return_stats: bool = False):
    """Hexagon face-flip sweep for the weight ``x**ell * n**N``, in place.

    ``face`` replaces the sweep by a single proposal on that face.
    With ``return_stats`` the result is ``(config, accepted, d_ell, d_N, last_ratio)``.
    """
    lat = config.lattice
    stamp = np.zeros(lat.n_edges, dtype=np.int64)
    mark = np.zeros(1, dtype=np.int64)
    acc, dl, dN, ratio = _loop_gas_kernel(
        config.occupied, lat.face_edges, lat.face_verts, lat.edge_verts, lat.vert_edges,
        float(x), float(n), rng.state, sweeps * lat.n_faces if face is None else 1, stamp, mark,
        -1 if face is None else int(face))
    if return_stats:
        return config, acc, dl, dN, min(1.0, ratio)
    return config


def count_loops_fast(config: LoopModelConfig) -> int:
    lat = config.lattice
    return int(_count_all_loops(config.occupied, lat.edge_verts, lat.vert_edges))


# --------------------------------------------------------------------------
# chains
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ChainSpec:
    model: str
    params: ModelParams
    Lx: int
    Ly: int
    seed: int = 0
    thermalization: int | None = None
    sweeps: int = 100
    stride: int = 1
    chain_id: int = 0
    algorithm: str | None = None
    start: str = "cold"
    keep_configs: bool = True

    def __post_init__(self):
        if self.model not in ("ising", "loop_model"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.sweeps < 0 or (self.thermalization is not None and self.thermalization < 0):
            raise ValueError("sweep counts must be >= 0")
        if self.start not in ("cold", "hot"):
            raise ValueError("start must be 'cold' or 'hot'")
        if self.resolved_algorithm not in {"ising": ("wolff", "metropolis"),
                                           "loop_model": ("face_flip",)}[self.model]:
            raise ValueError(f"algorithm {self.algorithm!r} not available for {self.model}")

    @property
    def resolved_algorithm(self) -> str:
        if self.algorithm is not None:
            return self.algorithm
        return "wolff" if self.model == "ising" else "face_flip"

    @property
    def thermalization_sweeps(self) -> int:
        if self.thermalization is None:
            return 10 * max(self.Lx, self.Ly)
        return self.thermalization

    @property
    def n_samples(self) -> int:
        return self.sweeps // self.stride

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = asdict(self.params)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ChainSpec":
        d = dict(d)
        d["params"] = ModelParams(**d["params"])
        return cls(**d)


@dataclass
class SampleStream:
    spec: ChainSpec
    configs: list = field(default_factory=list)
    observables: dict = field(default_factory=dict)
    generator: str = GENERATOR_NAME

    def __len__(self) -> int:
        return len(next(iter(self.observables.values()), []))

    def observable(self, name: str) -> np.ndarray:
        return np.asarray(self.observables[name])


class Chain:
    """A single Markov chain; owns its configuration and RNG state."""

    def __init__(self, spec: ChainSpec):
        self.spec = spec
        self.lattice: HoneycombLattice = build_lattice(spec.Lx, spec.Ly)
        self.rng = Rng(spec.seed, spec.chain_id)
        self.sweeps_done = 0
        self.samples_taken = 0
        lat = self.lattice
        if spec.model == "ising":
            spins = np.ones(lat.n_faces, dtype=np.int8)
            if spec.start == "hot":
                for f in range(lat.n_faces):
                    spins[f] = 1 if self.rng.random() < 0.5 else -1
            self.config = SpinConfig(lat, spins)
            self.energy = ising_energy(self.config, spec.params.J, spec.params.h)
            self.mag_sum = int(spins.sum(dtype=np.int64))
            self._stack = np.empty(2 * lat.n_faces, dtype=np.int64)
            self._flag = np.zeros(lat.n_faces, dtype=np.bool_)
            if spec.resolved_algorithm == "wolff":
                self._p_add = _wolff_p_add(spec.params)
        else:
            self.config = LoopModelConfig.empty(lat)
            if spec.start == "hot":
                faces = [f for f in range(lat.n_faces) if self.rng.random() < 0.5]
                self.config = LoopModelConfig.from_faces(lat, faces)
            self.ell = self.config.n_occupied
            self.n_loops = count_loops_fast(self.config)
            self._stamp = np.zeros(lat.n_edges, dtype=np.int64)
            self._mark = np.zeros(1, dtype=np.int64)

    def _one_sweep(self):
        spec, lat, p = self.spec, self.lattice, self.spec.params
        if spec.model == "ising":
            if spec.resolved_algorithm == "metropolis":
                _, dE, dM = _metropolis_kernel(self.config.spins, lat.face_nbr, float(p.J),
                                               float(p.h), float(p.T), self.rng.state, 1)
            else:
                _, _, dE, dM, _ = _wolff_kernel(self.config.spins, lat.face_nbr, float(p.J),
                                                self._p_add, self.rng.state, self._stack,
                                                self._flag, lat.n_faces, 1 << 62)
            self.energy += dE
            self.mag_sum += dM
        else:
            _, dl, dN, _ = _loop_gas_kernel(
                self.config.occupied, lat.face_edges, lat.face_verts, lat.edge_verts,
                lat.vert_edges, float(p.x), float(p.n), self.rng.state, lat.n_faces, self._stamp,
                self._mark, -1)
            self.ell += dl
            self.n_loops += dN
        self.sweeps_done += 1
        if self.sweeps_done % ENERGY_CHECK_INTERVAL == 0:
            self.check_bookkeeping()

    def sweep(self, n: int = 1) -> None:
        for _ in range(n):
            self._one_sweep()

    def check_bookkeeping(self, rtol: float = 1e-9) -> None:
        """Compare incrementally tracked observables with a fresh recount."""
        p = self.spec.params
        if self.spec.model == "ising":
            fresh = ising_energy(self.config, p.J, p.h)
            if abs(fresh - self.energy) > rtol * max(1.0, abs(fresh)):
                raise RuntimeError(f"energy drift: tracked {self.energy}, fresh {fresh}")
            self.energy = fresh
            if self.mag_sum != int(self.config.spins.sum(dtype=np.int64)):
                raise RuntimeError("magnetization drift")
        else:
            if self.ell != self.config.n_occupied:
                raise RuntimeError("occupied-edge count drift")
            if p.n != 1.0 and self.n_loops != count_loops_fast(self.config):
                raise RuntimeError("loop count drift")

    def measure(self) -> dict:
        if self.spec.model == "ising":
            N = self.lattice.n_faces
            walls = LoopModelConfig.from_spins(self.config)
            return {
                "energy": self.energy,
                "magnetization": self.mag_sum / N,
                "ell": walls.n_occupied,
                "N": count_loops_fast(walls),
            }
        n_loops = self.n_loops if self.spec.params.n != 1.0 else count_loops_fast(self.config)
        return {"ell": self.ell, "N": n_loops}

    def snapshot(self) -> np.ndarray:
        if self.spec.model == "ising":
            return self.config.spins.copy()
        return self.config.occupied.copy()

    # -- checkpointing -----------------------------------------------------
    def state_dict(self) -> dict:
        bits = self.config.spins > 0 if self.spec.model == "ising" else self.config.occupied > 0
        return {
            "format": CHECKPOINT_FORMAT,
            "spec": self.spec.to_dict(),
            "sweeps_done": self.sweeps_done,
            "samples_taken": self.samples_taken,
            "config_bits": base64.b64encode(np.packbits(bits).tobytes()).decode("ascii"),
            "rng_state": self.rng.get_state(),
            "generator": GENERATOR_NAME,
            # tracked energy is a running float sum; store it so a resumed chain
            # reports the same bits as an uninterrupted one
            "energy": self.energy if self.spec.model == "ising" else None,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.state_dict(), indent=1))

    @classmethod
    def from_state_dict(cls, d: dict) -> "Chain":
        if d.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"unsupported checkpoint format {d.get('format')!r}")
        chain = cls(ChainSpec.from_dict(d["spec"]))
        raw = np.frombuffer(base64.b64decode(d["config_bits"]), dtype=np.uint8)
        lat = chain.lattice
        if chain.spec.model == "ising":
            bits = np.unpackbits(raw)[: lat.n_faces]
            chain.config = SpinConfig(lat, np.where(bits, 1, -1).astype(np.int8))
            p = chain.spec.params
            chain.energy = ising_energy(chain.config, p.J, p.h)
            chain.mag_sum = int(chain.config.spins.sum(dtype=np.int64))
        else:
            bits = np.unpackbits(raw)[: lat.n_edges]
            chain.config = LoopModelConfig(lat, bits.astype(np.uint8))
            chain.ell = chain.config.n_occupied
            chain.n_loops = count_loops_fast(chain.config)
        if d.get("energy") is not None:
            chain.energy = float(d["energy"])
        chain.rng.set_state(d["rng_state"])
        chain.sweeps_done = d["sweeps_done"]
        chain.samples_taken = d["samples_taken"]
        return chain

    @classmethod
    def load(cls, path) -> "Chain":
        return cls.from_state_dict(json.loads(Path(path).read_text()))


def run_chain(spec: ChainSpec, chain: Chain | None = None, checkpoint_path=None,
              checkpoint_every: int = 0, stop_after: int | None = None) -> SampleStream:
    """Thermalize, then record a snapshot every ``stride`` sweeps.

    Passing a restored ``chain`` resumes it; the returned stream then holds only
    the samples taken after the resume point. ``stop_after`` halts once that many
    samples (counted over the whole chain) exist.
    """
    chain = chain if chain is not None else Chain(spec)
    spec = chain.spec
    therm = spec.thermalization_sweeps
    if chain.sweeps_done < therm:
        chain.sweep(therm - chain.sweeps_done)
    stream = SampleStream(spec)
    target = spec.n_samples if stop_after is None else min(stop_after, spec.n_samples)
    while chain.samples_taken < target:
        chain.sweep(spec.stride)
        chain.samples_taken += 1
        for key, val in chain.measure().items():
            stream.observables.setdefault(key, []).append(val)
        if spec.keep_configs:
            stream.configs.append(chain.snapshot())
        if checkpoint_path and checkpoint_every and chain.samples_taken % checkpoint_every == 0:
            chain.save(checkpoint_path)
    stream.observables = {k: np.asarray(v) for k, v in stream.observables.items()}
    return stream


def run_chains(specs, threads: int = 1) -> list[SampleStream]:
    """Run independent chains, in parallel processes when ``threads > 1``."""
    specs = list(specs)
    if threads <= 1 or len(specs) <= 1:
        return [run_chain(s) for s in specs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run_chain, specs))
