"""Counter-based random stream used everywhere randomness is needed.

Every draw is a pure function of an explicit key (a tuple of integers), so
results never depend on call order, thread count, or batching.  The mixer is
splitmix64 applied once per key word; floats take the top 53 bits.  The same
construction is reimplemented in the compiled kernel and in the dataset
reader, so the constants here are load-bearing: do not change them without
regenerating every frozen expectation.
"""

from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# Stream purposes.  One namespace for the whole pipeline keeps keys collision
# free across modules.
SPAWN = 1
SPREAD = 2
SCALE = 3
YAW = 4
ASSET = 5
TRACE = 6
CENTER = 7
SPLIT = 8
MIX = 9
JITTER = 10
DERIVE = 11

_U01_SCALE = 2.0 ** -53


def _splitmix(z: int) -> int:
    z = (z + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def hash64(*words: int) -> int:
    """Mix integer key words into a 64-bit hash."""
    h = 0
    for w in words:
        h = _splitmix(h ^ (w & MASK64))
    return h


def u01(*words: int) -> float:
    """Uniform draw in [0, 1) keyed by the given words."""
    return (hash64(*words) >> 11) * _U01_SCALE


def uniform(lo: float, hi: float, *words: int) -> float:
    return lo + u01(*words) * (hi - lo)


def normal(mu: float, sigma: float, *words: int) -> float:
    """Standard Box-Muller transform on two keyed uniforms.

    The first uniform is shifted into (0, 1] so the log never sees zero.
    """
    u1 = ((hash64(*words, 0) >> 11) + 1) * _U01_SCALE
    u2 = u01(*words, 1)
    z = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
    return mu + sigma * z


def derive_seed(master: int, label: str) -> int:
    """Derive a substream seed from a master seed and a stage label."""
    data = label.encode("utf-8")
    words = [int.from_bytes(data[i : i + 8], "little") for i in range(0, len(data), 8)]
    return hash64(master, DERIVE, len(data), *words)


# Vectorised counterparts.  numpy uint64 arithmetic wraps like C, which is
# exactly what the scalar versions emulate with explicit masking.

_NP_GOLDEN = np.uint64(_GOLDEN)
_NP_MIX1 = np.uint64(_MIX1)
_NP_MIX2 = np.uint64(_MIX2)
_NP_30 = np.uint64(30)
_NP_27 = np.uint64(27)
_NP_31 = np.uint64(31)
_NP_11 = np.uint64(11)


def _splitmix_vec(z: np.ndarray) -> np.ndarray:
    z = z + _NP_GOLDEN
    z = (z ^ (z >> _NP_30)) * _NP_MIX1
    z = (z ^ (z >> _NP_27)) * _NP_MIX2
    return z ^ (z >> _NP_31)


def _as_u64(w) -> np.ndarray:
    if isinstance(w, int):
        return np.uint64(w & MASK64)
    a = np.asarray(w)
    if a.dtype == np.uint64:
        return a
    return a.astype(np.int64, copy=False).astype(np.uint64)


def hash64_vec(*words) -> np.ndarray:
    """Vectorised hash64; scalar words broadcast against array words."""
    arrays = [_as_u64(w) for w in words]
    shape = np.broadcast_shapes(*(a.shape for a in arrays))
    h = np.zeros(shape, dtype=np.uint64)
    for a in arrays:
        h = _splitmix_vec(h ^ a)
    return h


def u01_vec(*words) -> np.ndarray:
    return (hash64_vec(*words) >> _NP_11).astype(np.float64) * _U01_SCALE
