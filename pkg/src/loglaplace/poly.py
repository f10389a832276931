"""Sparse multivariate polynomials over floats or truncated ε-series.

A :class:`Polynomial` stores one exponent row per monomial and one coefficient
row per monomial. In the scalar ring the coefficient row has length 1; in the
ε-series ring of order ``L`` it holds the ``L + 1`` entries ``c_0 .. c_L``.
Rows are kept lexicographically sorted with exact-zero rows removed, so two
equal polynomials have identical arrays.

Products and compositions always take an explicit ``degree_cap``. With
``eps_weight = w > 0`` the entry ``ε^ℓ x^α`` additionally survives only when
``|α| + w·ℓ <= degree_cap``, which is the graded truncation used by the
quadratization stages.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _backend
from .series import EpsSeries


def _canonical(exps: np.ndarray, coefs: np.ndarray):
    if exps.shape[0] == 0:
        return exps, coefs
    uniq, inv = np.unique(exps, axis=0, return_inverse=True)
    if uniq.shape[0] != exps.shape[0]:
        merged = np.zeros((uniq.shape[0], coefs.shape[1]))
        np.add.at(merged, inv.reshape(-1), coefs)
        exps, coefs = uniq, merged
    else:
        order = np.lexsort(exps.T[::-1])
        exps, coefs = exps[order], coefs[order]
    keep = np.any(coefs != 0.0, axis=1)
    return exps[keep], coefs[keep]


def _ring_width(order: int | None) -> int:
    return 1 if order is None else order + 1


class Polynomial:
    """Immutable sparse polynomial in ``dim`` variables.

    Parameters
    ----------
    dim : int
        Number of variables.
    exps : array_like, shape (n, dim)
        Non-negative integer exponent rows.
    coefs : array_like, shape (n,) or (n, K)
        Coefficients; ``K = 1`` in the scalar ring, ``K = order + 1`` otherwise.
    order : int or None
        ε-truncation order, or ``None`` for plain float coefficients.
    max_degree : int or None
        Optional degree bound; a term above it is an error, not a silent drop.
    """

    __slots__ = ("dim", "order", "max_degree", "_e", "_c")

    def __init__(self, dim: int, exps, coefs, order: int | None = None,
                 max_degree: int | None = None):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        K = _ring_width(order)
        e = np.asarray(exps, dtype=np.int64).reshape(-1, dim)
        c = np.asarray(coefs, dtype=float)
        if c.ndim == 1:
            c = c.reshape(-1, 1) if K == 1 else c.reshape(-1, K)
        if c.shape != (e.shape[0], K):
            raise ValueError(f"coefficient shape {c.shape} does not match {(e.shape[0], K)}")
        if np.any(e < 0):
            raise ValueError("exponents must be non-negative")
        e, c = _canonical(e, c)
        if max_degree is not None and e.shape[0] and e.sum(axis=1).max() > max_degree:
            raise ValueError(f"term of degree {int(e.sum(axis=1).max())} exceeds max_degree {max_degree}")
        e = np.ascontiguousarray(e)
        c = np.ascontiguousarray(c)
        e.setflags(write=False)
        c.setflags(write=False)
        self.dim = dim
        self.order = order
        self.max_degree = max_degree
        self._e = e
        self._c = c

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_terms(cls, dim: int, terms: Mapping | Iterable, order: int | None = None,
                   max_degree: int | None = None) -> "Polynomial":
        """Build from ``{exponent tuple: coefficient}`` or an iterable of pairs.

        Coefficients may be floats, :class:`EpsSeries` or sequences of ε-entries.
        """
        items = terms.items() if isinstance(terms, Mapping) else terms
        K = _ring_width(order)
        es, cs = [], []
        for exp, coef in items:
            if len(exp) != dim:
                raise ValueError(f"exponent {tuple(exp)} has wrong length for dim {dim}")
            row = np.zeros(K)
            if isinstance(coef, EpsSeries):
                vals = coef.coeffs
            else:
                vals = np.atleast_1d(np.asarray(coef, dtype=float))
            if vals.size > K and np.any(vals[K:]):
                raise ValueError("coefficient has more ε-entries than the ring order allows")
            row[:min(K, vals.size)] = vals[:K]
            es.append(tuple(exp))
            cs.append(row)
        if not es:
            return cls.zero(dim, order, max_degree)
        return cls(dim, es, np.array(cs), order, max_degree)

    @classmethod
    def zero(cls, dim: int, order: int | None = None, max_degree: int | None = None):
        return cls(dim, np.zeros((0, dim)), np.zeros((0, _ring_width(order))), order, max_degree)

    @classmethod
    def constant(cls, dim: int, value, order: int | None = None):
        return cls.from_terms(dim, {(0,) * dim: value}, order)

    @classmethod
    def variable(cls, dim: int, i: int, order: int | None = None):
        exp = [0] * dim
        exp[i] = 1
        return cls.from_terms(dim, {tuple(exp): 1.0}, order)

    # -- accessors -----------------------------------------------------------

    @property
    def exps(self) -> np.ndarray:
        return self._e

    @property
    def coefs(self) -> np.ndarray:
        return self._c

    @property
    def K(self) -> int:
        return self._c.shape[1]

    @property
    def nterms(self) -> int:
        return self._e.shape[0]

    def __len__(self):
        return self.nterms

    @property
    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return int(self._e.sum(axis=1).max()) if self.nterms else -1

    def is_zero(self) -> bool:
        return self.nterms == 0

    def _coef_out(self, row: np.ndarray):
        return float(row[0]) if self.order is None else EpsSeries(row)

    def items(self):
        """Yield ``(exponent tuple, coefficient)`` in lexicographic order."""
        for e, c in zip(self._e, self._c):
            yield tuple(int(v) for v in e), self._coef_out(c)

    def __getitem__(self, exp: Sequence[int]):
        exp = np.asarray(exp, dtype=np.int64)
        hit = np.nonzero(np.all(self._e == exp, axis=1))[0]
        if hit.size:
            return self._coef_out(self._c[hit[0]])
        return self._coef_out(np.zeros(self.K))

    def max_abs(self) -> float:
        return float(np.abs(self._c).max()) if self.nterms else 0.0

    def _new(self, exps, coefs, order=None, max_degree=None):
        return Polynomial(self.dim, exps, coefs, self.order if order is None else order,
                          self.max_degree if max_degree is None else max_degree)

    # -- ring bookkeeping ----------------------------------------------------

    def as_eps(self, order: int) -> "Polynomial":
        """Embed into the ε-series ring of the given order (truncating if needed)."""
        if self.order == order:
            return self
        c = np.zeros((self.nterms, order + 1))
        w = min(self.K, order + 1)
        c[:, :w] = self._c[:, :w]
        return Polynomial(self.dim, self._e, c, order, self.max_degree)

    def _align(self, other: "Polynomial"):
        if not isinstance(other, Polynomial):
            raise TypeError(f"expected Polynomial, got {type(other).__name__}")
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
        if self.order == other.order:
            return self, other
        if self.order is None:
            return self.as_eps(other.order), other
        if other.order is None:
            return self, other.as_eps(self.order)
        raise ValueError(f"ε-order mismatch: {self.order} vs {other.order}")

    def eps_coeff(self, ell: int) -> "Polynomial":
        """Scalar-ring polynomial multiplying ε^ℓ."""
        if self.order is None:
            c = self._c[:, 0] if ell == 0 else np.zeros(self.nterms)
        else:
            c = self._c[:, ell] if ell <= self.order else np.zeros(self.nterms)
        return Polynomial(self.dim, self._e, c, None, self.max_degree)

    def shift_eps(self, k: int) -> "Polynomial":
        """Multiply by ε^k, dropping entries past the truncation order."""
        if self.order is None:
            raise ValueError("shift_eps needs the ε-series ring")
        c = np.zeros_like(self._c)
        if k < self.K:
            c[:, k:] = self._c[:, :self.K - k]
        return self._new(self._e, c)

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other):
        if np.isscalar(other):
            other = Polynomial.constant(self.dim, float(other), self.order)
        a, b = self._align(other)
        return Polynomial(self.dim, np.concatenate([a._e, b._e]),
                          np.concatenate([a._c, b._c]), a.order, _bound(a, b))

    __radd__ = __add__

    def __neg__(self):
        return self._new(self._e, -self._c)

    def __sub__(self, other):
        if np.isscalar(other):
            return self + (-float(other))
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, s) -> "Polynomial":
        """Multiply by a float or an :class:`EpsSeries` (truncated at the ring order)."""
        if isinstance(s, EpsSeries):
            p = self.as_eps(s.order) if self.order is None else self
            if p.order != s.order:
                raise ValueError(f"ε-order mismatch: {p.order} vs {s.order}")
            K = p.K
            c = np.zeros_like(p._c)
            for i in range(K):
                c[:, i:] += s.coeffs[i] * p._c[:, :K - i]
            return p._new(p._e, c)
        return self._new(self._e, self._c * float(s))

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            a, b = self._align(other)
            cap = _bound(a, b)
            if cap is None:
                cap = max(a.degree, 0) + max(b.degree, 0)
            return poly_multiply(a, b, cap)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def multiply(self, other: "Polynomial", degree_cap: int, eps_weight: int = 0):
        return poly_multiply(self, other, degree_cap, eps_weight)

    def pow(self, n: int, degree_cap: int, eps_weight: int = 0) -> "Polynomial":
        out = Polynomial.constant(self.dim, 1.0, self.order)
        for _ in range(n):
            out = poly_multiply(out, self, degree_cap, eps_weight)
        return out

    # -- structure -----------------------------------------------------------

    def homogeneous(self, n: int) -> "Polynomial":
        """Degree-``n`` part."""
        keep = self._e.sum(axis=1) == n
        return self._new(self._e[keep], self._c[keep])

    def truncate(self, degree_cap: int, eps_weight: int = 0) -> "Polynomial":
        deg = self._e.sum(axis=1)
        keep = deg <= degree_cap
        e, c = self._e[keep], self._c[keep].copy()
        if eps_weight:
            ell = np.arange(self.K)
            c[deg[keep][:, None] + eps_weight * ell[None, :] > degree_cap] = 0.0
        return self._new(e, c)

    def without_degrees(self, lo: int, hi: int | None = None) -> "Polynomial":
        """Drop every term with degree in ``[lo, hi]``."""
        deg = self._e.sum(axis=1)
        drop = (deg >= lo) if hi is None else (deg >= lo) & (deg <= hi)
        return self._new(self._e[~drop], self._c[~drop])

    def partial(self, i: int) -> "Polynomial":
        e = self._e.copy()
        k = e[:, i]
        keep = k > 0
        e = e[keep]
        e[:, i] -= 1
        return self._new(e, self._c[keep] * k[keep, None])

    def grad(self) -> list["Polynomial"]:
        return [self.partial(i) for i in range(self.dim)]

    def laplacian(self) -> "Polynomial":
        out = Polynomial.zero(self.dim, self.order)
        for i in range(self.dim):
            out = out + self.partial(i).partial(i)
        return out

    # -- evaluation ----------------------------------------------------------

    def eval_rows(self, x) -> np.ndarray:
        """Evaluate at points; returns shape ``(..., K)`` (ε-entries last)."""
        x = np.asarray(x, dtype=float)
        pts = x.reshape(-1, self.dim)
        if self.nterms == 0:
            return np.zeros(x.shape[:-1] + (self.K,)) if x.ndim > 1 else np.zeros(self.K)
        mono = np.ones((pts.shape[0], self.nterms))
        for v in range(self.dim):
            ev = self._e[:, v]
            if np.any(ev):
                mono *= pts[:, v:v + 1] ** ev[None, :]
        out = mono @ self._c
        return out.reshape(x.shape[:-1] + (self.K,)) if x.ndim > 1 else out[0]

    def __call__(self, x):
        """Float (scalar ring) or :class:`EpsSeries` at one point; arrays for many."""
        x = np.asarray(x, dtype=float)
        r = self.eval_rows(x)
        if x.ndim == 1:
            return float(r[0]) if self.order is None else EpsSeries(r)
        return r[..., 0] if self.order is None else r

    def eval_at_eps(self, x, eps: float):
        """Numeric value with ε replaced by a number."""
        r = self.eval_rows(x)
        return r @ (eps ** np.arange(self.K))

    # -- comparison / display --------------------------------------------------

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return (self.dim == other.dim and self.order == other.order
                and np.array_equal(self._e, other._e) and np.array_equal(self._c, other._c))

    def __hash__(self):
        return hash((self.dim, self.order, self._e.tobytes(), self._c.tobytes()))

    def allclose(self, other: "Polynomial", rtol: float = 1e-12, atol: float = 1e-14) -> bool:
        diff = self - other
        scale = max(self.max_abs(), other.max_abs(), 1.0)
        return diff.max_abs() <= atol + rtol * scale

    def __repr__(self):
        if self.nterms == 0:
            return f"Polynomial(dim={self.dim}, 0)"
        parts = []
        for exp, c in self.items():
            mono = "*".join(f"x{i + 1}^{k}" if k > 1 else f"x{i + 1}"
                            for i, k in enumerate(exp) if k) or "1"
            parts.append(f"{c!r}*{mono}")
        return f"Polynomial(dim={self.dim}, " + " + ".join(parts) + ")"


def _bound(a: Polynomial, b: Polynomial):
    if a.max_degree is None:
        return b.max_degree
    if b.max_degree is None:
        return a.max_degree
    return min(a.max_degree, b.max_degree)


def poly_multiply(p: Polynomial, q: Polynomial, degree_cap: int, eps_weight: int = 0) -> Polynomial:
    """Product ``p·q`` with terms of degree above ``degree_cap`` discarded."""
    a, b = p._align(q)
    e, c = _backend.poly_mul(a._e, a._c, b._e, b._c, degree_cap, eps_weight)
    return Polynomial(a.dim, e, c, a.order)


@dataclass(frozen=True)
class PolyMap:
    """Polynomial map ``R^d -> R^d``, one component per coordinate.

    With ``identity_part`` set, component ``i`` must be ``x_i`` plus terms of
    degree ``>= 2`` and no other linear or constant content.
    """

    dim: int
    components: tuple
    identity_part: bool = False

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        if len(comps) != self.dim:
            raise ValueError(f"map needs {self.dim} components, got {len(comps)}")
        orders = {c.order for c in comps}
        if any(c.dim != self.dim for c in comps):
            raise ValueError("component dimension mismatch")
        if len(orders - {None}) > 1:
            raise ValueError("components live in different ε-rings")
        if self.identity_part:
            for i, comp in enumerate(comps):
                low = comp.truncate(1)
                target = Polynomial.variable(self.dim, i, comp.order)
                if low != target:
                    raise ValueError(f"component {i} is not x_{i + 1} plus higher-order terms")

    @classmethod
    def identity(cls, dim: int, order: int | None = None) -> "PolyMap":
        return cls(dim, tuple(Polynomial.variable(dim, i, order) for i in range(dim)), True)

    @classmethod
    def from_perturbation(cls, perturbation: Sequence[Polynomial]) -> "PolyMap":
        """``x + φ(x)`` for components φ of degree ``>= 2``."""
        dim = len(perturbation)
        comps = tuple(Polynomial.variable(dim, i, p.order) + p for i, p in enumerate(perturbation))
        return cls(dim, comps, True)

    @property
    def order(self):
        orders = {c.order for c in self.components} - {None}
        return orders.pop() if orders else None

    def __call__(self, x):
        return np.stack([np.asarray(c(x)) for c in self.components], axis=-1) \
            if self.order is None else [c(x) for c in self.components]

    def eval_at_eps(self, x, eps: float) -> np.ndarray:
        return np.stack([c.eval_at_eps(x, eps) for c in self.components], axis=-1)

    def jacobian(self) -> list[list[Polynomial]]:
        """``J[i][j] = ∂ m_i / ∂ x_j``."""
        return [c.grad() for c in self.components]

    def perturbation(self) -> list[Polynomial]:
        if not self.identity_part:
            raise ValueError("perturbation is defined for identity-part maps only")
        return [c - Polynomial.variable(self.dim, i, c.order) for i, c in enumerate(self.components)]


class _PowerCache:
    """Monomials ``m^α`` of a map, built one factor at a time and memoized."""

    def __init__(self, m: PolyMap, degree_cap: int, eps_weight: int, order):
        self.comps = [c if order is None else c.as_eps(order) for c in m.components]
        self.cap = degree_cap
        self.w = eps_weight
        self.order = order
        self.dim = m.dim
        self.memo: dict[tuple, Polynomial] = {}

    def get(self, alpha: tuple) -> Polynomial:
        hit = self.memo.get(alpha)
        if hit is not None:
            return hit
        if sum(alpha) == 0:
            out = Polynomial.constant(self.dim, 1.0, self.order)
        else:
            i = max(v for v in range(self.dim) if alpha[v])
            parent = list(alpha)
            parent[i] -= 1
            out = poly_multiply(self.get(tuple(parent)), self.comps[i], self.cap, self.w)
        self.memo[alpha] = out
        return out


def compose(p: Polynomial, m: PolyMap, degree_cap: int, eps_weight: int = 0,
            _cache: _PowerCache | None = None) -> Polynomial:
    """``p ∘ m`` with terms of degree above ``degree_cap`` discarded."""
    if p.dim != m.dim:
        raise ValueError(f"dimension mismatch: polynomial {p.dim} vs map {m.dim}")
    morder = m.order
    if p.order is not None and morder is not None and p.order != morder:
        raise ValueError(f"ε-order mismatch: {p.order} vs {morder}")
    order = p.order if p.order is not None else morder
    if order is not None:
        p = p.as_eps(order)
    cache = _cache or _PowerCache(m, degree_cap, eps_weight, order)
    es, cs = [], []
    for exp, row in zip(p.exps, p.coefs):
        term = cache.get(tuple(int(v) for v in exp))
        if term.nterms == 0:
            continue
        coef = Polynomial(p.dim, np.zeros((1, p.dim)), row[None, :], order)
        prod = poly_multiply(coef, term, degree_cap, eps_weight)
        es.append(prod.exps)
        cs.append(prod.coefs)
    if not es:
        return Polynomial.zero(p.dim, order)
    return Polynomial(p.dim, np.concatenate(es), np.concatenate(cs), order)


def compose_maps(a: PolyMap, b: PolyMap, degree_cap: int, eps_weight: int = 0) -> PolyMap:
    """``a ∘ b`` truncated at ``degree_cap``."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    order = a.order if a.order is not None else b.order
    cache = _PowerCache(b, degree_cap, eps_weight, order)
    comps = tuple(compose(c, b, degree_cap, eps_weight, cache) for c in a.components)
    return PolyMap(a.dim, comps, a.identity_part and b.identity_part)
