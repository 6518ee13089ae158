# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled counter-stream kernels.

Single-pass splitmix64-over-counter generation, fused with the inverse
normal CDF for the Gaussian variant. Output bits must match
``_fallback`` exactly: the integer pipeline is exact by construction and
the float steps (odd-mantissa * 2**-53, ndtri, scale multiply) are the
same correctly-rounded IEEE operations, with ndtri resolving to the very
same SciPy routine the fallback calls.
"""

import numpy as np

cimport numpy as cnp
from scipy.special.cython_special cimport ndtri

cnp.import_array()

cdef extern from *:
    """
    #include <stdint.h>
    static inline uint64_t sm64_at(uint64_t key, uint64_t t) {
        uint64_t z = key + (t + 1ULL) * 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    """
    unsigned long long sm64_at(unsigned long long key, unsigned long long t) nogil

cdef double _INV53 = 1.0 / 9007199254740992.0


def counter_hash(key, start, n):
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] out = np.empty(n, dtype=np.uint64)
    cdef unsigned long long k = key, s = start
    cdef Py_ssize_t i, m = n
    with nogil:
        for i in range(m):
            out[i] = sm64_at(k, s + <unsigned long long> i)
    return out


def counter_uniforms(key, start, n):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef unsigned long long k = key, s = start, z
    cdef Py_ssize_t i, m = n
    with nogil:
        for i in range(m):
            z = sm64_at(k, s + <unsigned long long> i)
            out[i] = <double> ((z >> 12) * 2ULL + 1ULL) * _INV53
    return out


def counter_gaussians(key, start, n, scale=1.0):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef unsigned long long k = key, s = start, z
    cdef double c = scale
    cdef Py_ssize_t i, m = n
    cdef double u
    if c == 1.0:
        for i in range(m):
            z = sm64_at(k, s + <unsigned long long> i)
            u = <double> ((z >> 12) * 2ULL + 1ULL) * _INV53
            out[i] = ndtri(u)
    else:
        for i in range(m):
            z = sm64_at(k, s + <unsigned long long> i)
            u = <double> ((z >> 12) * 2ULL + 1ULL) * _INV53
            out[i] = ndtri(u) * c
    return out
