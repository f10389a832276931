# distutils: language = c++
"""Compiled sparse-polynomial product over packed exponent keys."""
from libcpp.unordered_map cimport unordered_map
from libcpp.vector cimport vector
from cython.operator cimport dereference as deref

import numpy as np
cimport numpy as cnp

cnp.import_array()


def poly_mul(const long long[:, ::1] ea, const double[:, ::1] ca,
             const long long[:, ::1] eb, const double[:, ::1] cb,
             long long degree_cap, long long eps_weight):
    """Product of two sparse polynomials with ε-series coefficients.

    Rows of ``ea``/``eb`` are exponent vectors, rows of ``ca``/``cb`` are
    truncated ε-series (length K). Entry ℓ of an output monomial of degree n
    is kept iff ``n <= degree_cap`` and ``n + eps_weight*ℓ <= degree_cap``.
    The output has unique exponent rows but is neither sorted nor pruned.
    Raises OverflowError if the exponent packing does not fit in 62 bits.
    """
    cdef Py_ssize_t na = ea.shape[0], nb = eb.shape[0]
    cdef Py_ssize_t d = ea.shape[1], K = ca.shape[1]
    cdef Py_ssize_t i, j, k, a, v, s
    cdef long long base = degree_cap + 1
    cdef long long key, deg, kmax
    cdef double acc, lim = 1.0
    cdef double cai

    for v in range(d):
        lim *= <double>base
    if lim >= 4.0e18:
        raise OverflowError("exponent packing overflow")

    cdef cnp.ndarray[cnp.int64_t, ndim=1] ka = np.zeros(na, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] kb = np.zeros(nb, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] dga = np.zeros(na, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] dgb = np.zeros(nb, dtype=np.int64)
    cdef long long mult
    for i in range(na):
        mult = 1
        for v in range(d):
            ka[i] += ea[i, v] * mult
            dga[i] += ea[i, v]
            mult *= base
    for j in range(nb):
        mult = 1
        for v in range(d):
            kb[j] += eb[j, v] * mult
            dgb[j] += eb[j, v]
            mult *= base

    cdef unordered_map[long long, Py_ssize_t] slot
    cdef unordered_map[long long, Py_ssize_t].iterator it
    cdef vector[long long] keys
    cdef vector[double] out

    for i in range(na):
        if dga[i] > degree_cap:
            continue
        for j in range(nb):
            deg = dga[i] + dgb[j]
            if deg > degree_cap:
                continue
            kmax = K - 1
            if eps_weight > 0 and (degree_cap - deg) // eps_weight < kmax:
                kmax = (degree_cap - deg) // eps_weight
            key = ka[i] + kb[j]
            it = slot.find(key)
            if it == slot.end():
                s = keys.size()
                slot[key] = s
                keys.push_back(key)
                out.resize((s + 1) * K, 0.0)
            else:
                s = deref(it).second
            for a in range(kmax + 1):
                cai = ca[i, a]
                if cai == 0.0:
                    continue
                for k in range(a, kmax + 1):
                    out[s * K + k] += cai * cb[j, k - a]

    cdef Py_ssize_t n = keys.size()
    cdef cnp.ndarray[cnp.int64_t, ndim=2] e = np.empty((n, d), dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] c = np.empty((n, K), dtype=np.float64)
    for s in range(n):
        key = keys[s]
        for v in range(d):
            e[s, v] = key % base
            key //= base
        for k in range(K):
            c[s, k] = out[s * K + k]
    return e, c
