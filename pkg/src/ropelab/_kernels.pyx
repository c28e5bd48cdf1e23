# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Signatures mirror :mod:`ropelab._fallback`."""

from cython.parallel import prange
from libc.math cimport exp, log
from libc.stdint cimport uint64_t

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double TWO_M53 = 1.0 / 9007199254740992.0


cdef inline uint64_t _mix(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


def splitmix64_fill(uint64_t seed, uint64_t start, double[::1] out,
                    double low, double high):
    cdef Py_ssize_t i, n = out.shape[0]
    cdef uint64_t state = seed + (start + 1) * GOLDEN
    cdef double width = high - low
    with nogil:
        for i in range(n):
            out[i] = low + width * (<double>(_mix(state) >> 11) * TWO_M53)
            state = state + GOLDEN
    return start + n


def splitmix64_raw(uint64_t seed, uint64_t start, uint64_t[::1] out):
    cdef Py_ssize_t i, n = out.shape[0]
    cdef uint64_t state = seed + (start + 1) * GOLDEN
    with nogil:
        for i in range(n):
            out[i] = _mix(state)
            state = state + GOLDEN
    return start + n


def rope_rotate(const double[:, ::1] x, const double[:, ::1] cos_t,
                const double[:, ::1] sin_t, double[:, ::1] out):
    cdef Py_ssize_t n = x.shape[0], half = cos_t.shape[1]
    cdef Py_ssize_t m, j
    cdef double a, b, c, s
    if x.shape[1] != 2 * half or out.shape[0] != n or cos_t.shape[0] != n:
        raise ValueError("shape mismatch in rope_rotate")
    with nogil:
        for m in range(n):
            for j in range(half):
                a = x[m, 2 * j]
                b = x[m, 2 * j + 1]
                c = cos_t[m, j]
                s = sin_t[m, j]
                out[m, 2 * j] = a * c - b * s
                out[m, 2 * j + 1] = b * c + a * s


def causal_softmax_entropy(double[:, ::1] scores, const double[::1] row_scale,
                           double[::1] entropy):
    cdef Py_ssize_t n = scores.shape[0]
    cdef Py_ssize_t m, k
    cdef double scale, top, z, e, total, weighted, inv
    if scores.shape[1] != n or row_scale.shape[0] != n or entropy.shape[0] != n:
        raise ValueError("shape mismatch in causal_softmax_entropy")
    for m in prange(n, nogil=True, schedule="dynamic"):
        scale = row_scale[m]
        top = scale * scores[m, 0]
        for k in range(1, m + 1):
            z = scale * scores[m, k]
            if z > top:
                top = z
        total = 0.0
        weighted = 0.0
        for k in range(m + 1):
            z = scale * scores[m, k] - top
            e = exp(z)
            scores[m, k] = e
            total = total + e
            weighted = weighted + e * z
        inv = 1.0 / total
        for k in range(m + 1):
            scores[m, k] = scores[m, k] * inv
        for k in range(m + 1, n):
            scores[m, k] = 0.0
        entropy[m] = log(total) - weighted * inv
