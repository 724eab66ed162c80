"""xoshiro256** generator with explicit, serializable state.

Kernels take the 4-word ``uint64`` state array and advance it in place, so a
chain's stream is a pure function of its seed material and is checkpointable
by copying four integers. Seeds are expanded with :class:`numpy.random.SeedSequence`
from ``(seed, chain_id)``.
"""

from __future__ import annotations

import numpy as np
from numba import njit

GENERATOR_NAME = "xoshiro256** (SeedSequence[seed, chain_id] -> 4 x uint64)"

_U7 = np.uint64(7)
_U17 = np.uint64(17)
_U45 = np.uint64(45)
_U5 = np.uint64(5)
_U9 = np.uint64(9)
_U11 = np.uint64(11)
_U64 = np.uint64(64)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << k) | (x >> (_U64 - k))


@njit(cache=True)
def next_u64(s):
    result = _rotl(s[1] * _U5, _U7) * _U9
    t = s[1] << _U17
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], _U45)
    return result


@njit(cache=True)
def next_double(s):
    return float(next_u64(s) >> _U11) * _INV53


@njit(cache=True)
def next_below(s, n):
    return int(next_double(s) * n)


def seed_state(seed: int, chain_id: int = 0) -> np.ndarray:
    state = np.random.SeedSequence([int(seed), int(chain_id)]).generate_state(4, np.uint64)
    if not state.any():
        state[0] = 1
    return state


class Rng:
    """Thin Python handle around a xoshiro256** state array."""

    def __init__(self, seed: int = 0, chain_id: int = 0, state=None):
        self.state = seed_state(seed, chain_id) if state is None else np.array(state, dtype=np.uint64)

    def random(self) -> float:
        return next_double(self.state)

    def below(self, n: int) -> int:
        return next_below(self.state, n)

    def get_state(self) -> list[int]:
        return [int(v) for v in self.state]

    def set_state(self, words) -> None:
        self.state[:] = np.array(words, dtype=np.uint64)
