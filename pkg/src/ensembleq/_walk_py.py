"""Numpy implementation of the trial kernel; the fallback when ``_walk`` is not compiled.

Must stay bit-identical to ``_walk.pyx``. Stream layout::

    GAMMA   = 0x9E3779B97F4A7C15
    mix(z)  = SplitMix64 finalizer
    stream  = mix(seed XOR (trial * GAMMA))            (mod 2**64)
    u[d]    = (mix(stream + (d + 1) * GAMMA) >> 11) * 2**-53

Outcome at depth ``d`` is the number of node CDF entries ``<= u[d]``.
"""

import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))


def mix64(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def stream_ids(seed: int, start: int, n: int) -> np.ndarray:
    trials = np.arange(start, start + n, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(np.uint64(seed) ^ (trials * GAMMA))


def uniforms(streams: np.ndarray, depth: int) -> np.ndarray:
    with np.errstate(over="ignore"):
        bits = mix64(streams + np.uint64(depth + 1) * GAMMA)
    return (bits >> _S11).astype(np.float64) * 2.0 ** -53


def walk_trees(seed, start, n, cdf, offsets, sizes, children, depth):
    """Outcome indices, shape ``(n, depth)``, for trials ``start .. start + n - 1``."""
    streams = stream_ids(seed, start, n)
    out = np.zeros((n, depth), dtype=np.int64)
    node = np.zeros(n, dtype=np.int64)
    max_size = int(sizes.max()) if len(sizes) else 0
    for d in range(depth):
        u = uniforms(streams, d)
        off, size = offsets[node], sizes[node]
        j = np.zeros(n, dtype=np.int64)
        for i in range(max_size):
            inside = i < size
            edge = cdf[np.where(inside, off + i, 0)]
            j += inside & (u >= edge)
        out[:, d] = j
        node = children[off + j]
    return out
