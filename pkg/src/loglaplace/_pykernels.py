"""Numpy implementation of the polynomial kernels (no compiler needed)."""
from __future__ import annotations

import numpy as np

_CHUNK = 1 << 20


def poly_mul(ea, ca, eb, cb, degree_cap, eps_weight):
    """Same contract as the compiled ``poly_mul``."""
    d = ea.shape[1]
    K = ca.shape[1]
    if ea.shape[0] == 0 or eb.shape[0] == 0:
        return np.zeros((0, d), dtype=np.int64), np.zeros((0, K))
    dega = ea.sum(axis=1)
    degb = eb.sum(axis=1)
    ia, ib = np.nonzero(dega[:, None] + degb[None, :] <= degree_cap)
    if ia.size == 0:
        return np.zeros((0, d), dtype=np.int64), np.zeros((0, K))

    es, cs = [], []
    for start in range(0, ia.size, _CHUNK):
        sa = ia[start:start + _CHUNK]
        sb = ib[start:start + _CHUNK]
        e = ea[sa] + eb[sb]
        deg = dega[sa] + degb[sb]
        c = np.zeros((sa.size, K))
        A = ca[sa]
        B = cb[sb]
        for i in range(K):
            for j in range(K - i):
                c[:, i + j] += A[:, i] * B[:, j]
        if eps_weight > 0:
            ell = np.arange(K)
            c[deg[:, None] + eps_weight * ell[None, :] > degree_cap] = 0.0
        es.append(e)
        cs.append(c)
    e = np.concatenate(es)
    c = np.concatenate(cs)
    uniq, inv = np.unique(e, axis=0, return_inverse=True)
    out = np.zeros((uniq.shape[0], K))
    np.add.at(out, inv.reshape(-1), c)
    return uniq.astype(np.int64), out
