"""Counter-based uniform streams.

Every uniform is a pure function of (stream key, sample index, draw index),
built from the SplitMix64 output function. Samples can therefore be produced
in any order or split across workers and still come out bit-identical.
"""

from __future__ import annotations

import hashlib

import numba as nb
import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV_2_53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def stream_key(seed: int, stream: int = 0) -> int:
    """64-bit key for a (seed, stream) pair; distinct streams are independent."""
    if seed < 0 or stream < 0:
        raise ValueError("seed and stream must be non-negative")
    return mix64(mix64(seed + GAMMA) ^ mix64((stream + 1) * GAMMA))


def sample_key(key: int, index: int) -> int:
    return mix64(key + (index + 1) * GAMMA)


def uniform(skey: int, draw: int) -> float:
    """Uniform in [0, 1) for draw ``draw`` of the sample with key ``skey``."""
    return (mix64(skey + (draw + 1) * GAMMA) >> 11) * _INV_2_53


class SampleStream:
    """Uniform stream of one sample; ``next()`` returns successive draws."""

    def __init__(self, key: int, index: int):
        self.key = key
        self.index = index
        self._skey = sample_key(key, index)
        self._draw = 0

    def next(self) -> float:
        u = uniform(self._skey, self._draw)
        self._draw += 1
        return u


# numba twins of the functions above; all arithmetic is forced to uint64 so
# that multiplication wraps instead of promoting to float.

_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)
_UM1 = np.uint64(_M1)
_UM2 = np.uint64(_M2)
_UG = np.uint64(GAMMA)
_U1 = np.uint64(1)


@nb.njit(inline="always")
def nb_mix64(z):
    z = (z ^ (z >> _U30)) * _UM1
    z = (z ^ (z >> _U27)) * _UM2
    return z ^ (z >> _U31)


@nb.njit(inline="always")
def nb_sample_key(key, index):
    return nb_mix64(key + (np.uint64(index) + _U1) * _UG)


@nb.njit(inline="always")
def nb_uniform(skey, draw):
    return np.float64(nb_mix64(skey + (np.uint64(draw) + _U1) * _UG) >> _U11) * _INV_2_53


def derive_seed(seed: int, *parts) -> int:
    """Deterministic 63-bit child seed of ``seed`` keyed by ints/strings."""
    words = []
    for p in parts:
        if isinstance(p, str):
            words.append(int.from_bytes(hashlib.blake2b(p.encode(), digest_size=8).digest(), "little"))
        else:
            words.append(int(p))
    state = np.random.SeedSequence(seed, spawn_key=tuple(words)).generate_state(1, np.uint64)[0]
    return int(state) >> 1
