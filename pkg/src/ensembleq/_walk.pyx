# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled trial kernel. Bit-identical to ``_walk_py``; see its docstring for the stream layout."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef uint64_t GAMMA = 0x9E3779B97F4A7C15ULL


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


def walk_trees(seed, Py_ssize_t start, Py_ssize_t n,
               const double[::1] cdf, const int64_t[::1] offsets,
               const int64_t[::1] sizes, const int64_t[::1] children, Py_ssize_t depth):
    cdef uint64_t s = <uint64_t>seed
    out_arr = np.zeros((n, depth), dtype=np.int64)
    cdef int64_t[:, ::1] out = out_arr
    cdef Py_ssize_t t, d, i
    cdef int64_t node, off, size, j
    cdef uint64_t stream
    cdef double u
    with nogil:
        for t in range(n):
            stream = mix64(s ^ (<uint64_t>(start + t) * GAMMA))
            node = 0
            for d in range(depth):
                u = <double>(mix64(stream + <uint64_t>(d + 1) * GAMMA) >> 11) * (1.0 / 9007199254740992.0)
                off = offsets[node]
                size = sizes[node]
                j = 0
                for i in range(size):
                    if u >= cdf[off + i]:
                        j += 1
                out[t, d] = j
                node = children[off + j]
    return out_arr
