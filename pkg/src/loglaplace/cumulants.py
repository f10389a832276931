"""Cumulant path: ``b_{M/2}`` as a weighted sum of joint Gaussian cumulants of the ``p_k``.

With ``Z ~ N(0, I_d)`` and

    p_k(x) = ∇^k log g(0)[x^k] - ∇^{k+2} f(0)[x^{k+2}] / ((k+1)(k+2)),

the coefficient of ``λ^{-M/2}`` is

    b_{M/2} = Σ_{α : Σ i α_i = M} cum(p_α(Z)) / Π_i α_i! (i!)^{α_i},

where ``p_α`` lists ``α_i`` copies of ``p_i``.
"""
from __future__ import annotations

import math
import time
from typing import Sequence

import numpy as np

from .gaussian import expect_poly
from .model import ExpansionResult, Model
from .poly import Polynomial
from .tensor import tensor_to_poly

B1_CHECK_RTOL = 1e-10


def build_pk(model: Model, k: int) -> Polynomial:
    if not 1 <= k <= 2 * model.L - 1:
        raise ValueError(f"k={k} outside 1..{2 * model.L - 1}")
    p = tensor_to_poly(model.logg_tensor(k))
    if k + 2 in model.f_tensors:
        p = p - tensor_to_poly(model.f_tensors[k + 2]) * (1.0 / ((k + 1) * (k + 2)))
    return p


def set_partitions(n: int):
    """Yield the set partitions of ``range(n)`` as lists of blocks."""
    if n == 0:
        yield []
        return
    for part in set_partitions(n - 1):
        for i in range(len(part)):
            yield part[:i] + [part[i] + [n - 1]] + part[i + 1:]
        yield part + [[n - 1]]


class _BlockMoments:
    """Memoized ``E[Π_{j∈B} Y_j]`` keyed by the multiset of distinct polynomials in ``B``."""

    def __init__(self, polys: Sequence[Polynomial]):
        self.ids = []
        self.distinct: list[Polynomial] = []
        for p in polys:
            for j, q in enumerate(self.distinct):
                if q is p or q == p:
                    self.ids.append(j)
                    break
            else:
                self.ids.append(len(self.distinct))
                self.distinct.append(p)
        self.products: dict[tuple, Polynomial] = {}
        self.moments: dict[tuple, float] = {}

    def product(self, key: tuple) -> Polynomial:
        hit = self.products.get(key)
        if hit is None:
            if len(key) == 1:
                hit = self.distinct[key[0]]
            else:
                hit = self.product(key[:-1]) * self.distinct[key[-1]]
            self.products[key] = hit
        return hit

    def __call__(self, block) -> float:
        key = tuple(sorted(self.ids[j] for j in block))
        hit = self.moments.get(key)
        if hit is None:
            hit = expect_poly(self.product(key))
            self.moments[key] = hit
        return hit


def joint_cumulant(polys: Sequence[Polynomial], _moments: _BlockMoments | None = None) -> float:
    """``cum(Y_1, ..., Y_m)`` for ``Y_j = polys[j](Z)``, by the set-partition formula."""
    m = len(polys)
    if m == 0:
        raise ValueError("joint cumulant needs at least one argument")
    dims = {p.dim for p in polys}
    if len(dims) != 1:
        raise ValueError(f"dimension mismatch among arguments: {sorted(dims)}")
    if any(p.order is not None for p in polys):
        raise ValueError("joint cumulant expects scalar-ring polynomials")
    E = _moments or _BlockMoments(polys)
    total = 0.0
    for part in set_partitions(m):
        nb = len(part)
        term = (-1) ** (nb - 1) * math.factorial(nb - 1)
        for block in part:
            term *= E(block)
            if term == 0.0:
                break
        total += term
    return total


def enumerate_alphas(M: int) -> list[tuple]:
    """All ``(α_1..α_M)`` with ``Σ i·α_i = M``, in lexicographic order."""
    out = []

    def rec(i, remaining, prefix):
        if i > M:
            if remaining == 0:
                out.append(tuple(prefix))
            return
        for a in range(remaining // i + 1):
            rec(i + 1, remaining - i * a, prefix + [a])

    rec(1, M, [])
    return sorted(out)


def _alpha_weight(alpha: tuple) -> float:
    w = 1.0
    for i, a in enumerate(alpha, start=1):
        w *= math.factorial(a) * math.factorial(i) ** a
    return w


def b_coefficient(model: Model, M: int, *, terms: list | None = None) -> float:
    """``b_{M/2}``; pass a list as ``terms`` to receive ``(α, contribution)`` pairs."""
    if M % 2 or not 2 <= M <= 2 * model.L - 2:
        raise ValueError(f"M={M} must be even and within 2..{2 * model.L - 2}")
    pk = {k: build_pk(model, k) for k in range(1, M + 1)}
    pool = _BlockMoments([pk[k] for k in range(1, M + 1)])
    total = 0.0
    for alpha in enumerate_alphas(M):
        if any(a and pk[i].is_zero() for i, a in enumerate(alpha, start=1)):
            contrib = 0.0
        else:
            args = [pk[i] for i, a in enumerate(alpha, start=1) for _ in range(a)]
            contrib = joint_cumulant(args, _SharedMoments(pool, args)) / _alpha_weight(alpha)
        if terms is not None:
            terms.append((alpha, contrib))
        total += contrib
    return total


class _SharedMoments:
    """View of a shared moment pool for one argument list."""

    def __init__(self, pool: _BlockMoments, args: Sequence[Polynomial]):
        self.pool = pool
        self.ids = [next(j for j, q in enumerate(pool.distinct) if q is p or q == p) for p in args]

    def __call__(self, block) -> float:
        key = tuple(sorted(self.ids[j] for j in block))
        hit = self.pool.moments.get(key)
        if hit is None:
            hit = expect_poly(self.pool.product(key))
            self.pool.moments[key] = hit
        return hit


def b1_closed_form(model: Model) -> float:
    """``b_1`` from the five-term formula in ``∇³f, ∇⁴f, ∇g, ∇²g`` at 0."""
    d = model.d
    T3 = model.f_tensor(3)
    T4 = model.f_tensor(4)
    v = np.array([model.logg_tensor(1)[(i,)] for i in range(d)])
    S2 = model.logg_tensor(2)
    grad_lap_f = np.array([sum(T3[(i, j, j)] for j in range(d)) for i in range(d)])
    lap_g = sum(S2[(i, i)] for i in range(d)) + v @ v
    bilap_f = sum(T4[(i, i, j, j)] for i in range(d) for j in range(d))
    return float(-0.5 * grad_lap_f @ v + grad_lap_f @ grad_lap_f / 8.0
                 + T3.frobenius_sq() / 12.0 + 0.5 * lap_g - bilap_f / 8.0)


def _rel_gap(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0.0 else abs(a - b) / scale


def expand(model: Model) -> ExpansionResult:
    """``b_1 .. b_{L-1}`` by the cumulant formula, with a closed-form check on ``b_1``."""
    coeffs, diag = [], {"alphas": {}, "term_counts": {}, "timings": {}}
    for k in range(1, model.L):
        t0 = time.perf_counter()
        terms: list = []
        coeffs.append(b_coefficient(model, 2 * k, terms=terms))
        diag["timings"][k] = time.perf_counter() - t0
        diag["alphas"][k] = [list(a) for a, _ in terms]
        diag["term_counts"][k] = sum(1 for _, c in terms if c != 0.0)
    if model.L >= 2:
        closed = b1_closed_form(model)
        gap = _rel_gap(coeffs[0], closed)
        diag["b1_closed_form"] = closed
        diag["b1_rel_discrepancy"] = gap
        diag["b1_check_passed"] = gap <= B1_CHECK_RTOL or abs(coeffs[0] - closed) < 1e-15
    return ExpansionResult(tuple(coeffs), "cumulant", diag)


def b_series_oracle(model: Model, M: int) -> float:
    """Independent route: ``[t^M] log E[exp(Σ_k t^k p_k(Z)/k!)]`` via truncated series.

    Used only to cross-check :func:`b_coefficient`.
    """
    from .series import EpsSeries

    P = Polynomial.zero(model.d, order=M)
    for k in range(1, M + 1):
        P = P + build_pk(model, k).as_eps(M).scale(EpsSeries.eps(M, k)) * (1.0 / math.factorial(k))
    expo = Polynomial.constant(model.d, 1.0, order=M)
    power = Polynomial.constant(model.d, 1.0, order=M)
    for j in range(1, M + 1):
        power = power * P * (1.0 / j)
        expo = expo + power
    return expect_poly(expo).log()[M]
