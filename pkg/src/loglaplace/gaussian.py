"""Exact standard-Gaussian expectations of polynomials and low-order Hermite polynomials."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .poly import Polynomial
from .series import EpsSeries

MAX_EXPONENT = 60


@lru_cache(maxsize=None)
def double_factorial_odd(k: int) -> int:
    """``(k-1)!!`` for even ``k`` (the k-th moment of N(0,1))."""
    out = 1
    for j in range(k - 1, 0, -2):
        out *= j
    return out


def _moment_table(kmax: int) -> np.ndarray:
    if kmax > MAX_EXPONENT:
        raise OverflowError(f"exponent {kmax} exceeds supported maximum {MAX_EXPONENT}")
    return np.array([float(double_factorial_odd(k)) if k % 2 == 0 else 0.0
                     for k in range(kmax + 1)])


@lru_cache(maxsize=4096)
def moment(alpha: tuple) -> float:
    """``E[Z^α]`` for ``Z ~ N(0, I)``."""
    alpha = tuple(int(a) for a in alpha)
    if any(a < 0 for a in alpha):
        raise ValueError("exponents must be non-negative")
    if any(a > MAX_EXPONENT for a in alpha):
        raise OverflowError(f"exponent above {MAX_EXPONENT}")
    out = 1
    for a in alpha:
        if a % 2:
            return 0.0
        out *= double_factorial_odd(a)
    return float(out)


def expect_poly(p: Polynomial):
    """``E[p(Z)]``: a float, or an :class:`EpsSeries` for ε-series coefficients."""
    if p.nterms == 0:
        row = np.zeros(p.K)
    else:
        table = _moment_table(int(p.exps.max()))
        weights = np.prod(table[p.exps], axis=1)
        row = weights @ p.coefs
    return float(row[0]) if p.order is None else EpsSeries(row)


@dataclass(frozen=True)
class HermiteIndex:
    """First-order ``H_i`` or third-order ``H_{ijk}``; 0-based, stored sorted."""

    indices: tuple
    dim: int

    def __post_init__(self):
        idx = tuple(sorted(int(i) for i in self.indices))
        if len(idx) not in (1, 3):
            raise ValueError("only order-1 and order-3 Hermite polynomials are supported")
        if any(i < 0 or i >= self.dim for i in idx):
            raise ValueError(f"index {idx} out of range for dim {self.dim}")
        object.__setattr__(self, "indices", idx)

    @property
    def order(self) -> int:
        return len(self.indices)


def hermite_poly(h: HermiteIndex) -> Polynomial:
    d = h.dim

    def mono(*idx):
        e = [0] * d
        for i in idx:
            e[i] += 1
        return tuple(e)

    if h.order == 1:
        return Polynomial.from_terms(d, {mono(h.indices[0]): 1.0})
    i, j, k = h.indices
    terms: dict[tuple, float] = {mono(i, j, k): 1.0}
    for a, b, c in ((i, j, k), (j, i, k), (k, i, j)):
        if b == c:
            key = mono(a)
            terms[key] = terms.get(key, 0.0) - 1.0
    return Polynomial.from_terms(d, terms)


def hermite_eval(h: HermiteIndex, x: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    if h.order == 1:
        return float(x[h.indices[0]])
    i, j, k = h.indices
    return float(x[i] * x[j] * x[k] - x[i] * (j == k) - x[j] * (i == k) - x[k] * (i == j))


def hermite_second_moment(h: HermiteIndex) -> float:
    H = hermite_poly(h)
    return expect_poly(H * H)
