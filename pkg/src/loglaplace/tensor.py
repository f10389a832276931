"""Symmetric tensors stored by permutation class.

Indices are 0-based inside the library; the model file format is 1-based and
converts at the boundary.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from typing import Iterable, Mapping

import numpy as np

from .poly import Polynomial


def multinomial(counts: Iterable[int]) -> int:
    counts = list(counts)
    out = math.factorial(sum(counts))
    for c in counts:
        out //= math.factorial(c)
    return out


def _index_to_exp(idx: tuple, dim: int) -> tuple:
    exp = [0] * dim
    for i in idx:
        exp[i] += 1
    return tuple(exp)


def _exp_to_index(exp) -> tuple:
    return tuple(i for i, k in enumerate(exp) for _ in range(int(k)))


class SymTensor:
    """Symmetric order-``k`` tensor on ``R^dim``.

    ``entries`` maps sorted index tuples to values; absent classes are zero.
    """

    __slots__ = ("order", "dim", "_entries")

    def __init__(self, order: int, dim: int, entries: Mapping[tuple, float] | None = None):
        if order < 0 or dim < 1:
            raise ValueError("need order >= 0 and dim >= 1")
        self.order = order
        self.dim = dim
        clean = {}
        for key, val in (entries or {}).items():
            key = tuple(int(i) for i in key)
            if len(key) != order:
                raise ValueError(f"index {key} has length {len(key)}, expected {order}")
            if any(i < 0 or i >= dim for i in key):
                raise ValueError(f"index {key} out of range for dim {dim}")
            if list(key) != sorted(key):
                raise ValueError(f"index {key} is not sorted")
            if val != 0.0:
                clean[key] = float(val)
        self._entries = dict(sorted(clean.items()))

    @property
    def entries(self) -> dict:
        return dict(self._entries)

    def items(self):
        return self._entries.items()

    def __getitem__(self, idx) -> float:
        if isinstance(idx, (int, np.integer)):
            idx = (idx,)
        return self._entries.get(tuple(sorted(int(i) for i in idx)), 0.0)

    def is_zero(self) -> bool:
        return not self._entries

    def __eq__(self, other):
        if not isinstance(other, SymTensor):
            return NotImplemented
        return (self.order, self.dim, self._entries) == (other.order, other.dim, other._entries)

    def __repr__(self):
        return f"SymTensor(order={self.order}, dim={self.dim}, entries={self._entries})"

    @classmethod
    def zeros(cls, order: int, dim: int) -> "SymTensor":
        return cls(order, dim)

    @classmethod
    def from_dense(cls, A, atol: float = 1e-12) -> "SymTensor":
        """From a dense symmetric array; asymmetry beyond ``atol`` is an error."""
        A = np.asarray(A, dtype=float)
        order, dim = A.ndim, (A.shape[0] if A.ndim else 1)
        if order == 0:
            return cls(0, 1, {(): float(A)})
        entries = {}
        for key in itertools.combinations_with_replacement(range(dim), order):
            val = A[key]
            for perm in set(itertools.permutations(key)):
                if abs(A[perm] - val) > atol * max(1.0, abs(val)):
                    raise ValueError(f"array is not symmetric at {perm} vs {key}")
            entries[key] = val
        return cls(order, dim, entries)

    @classmethod
    def rank_one_sum(cls, weights, vectors, order: int) -> "SymTensor":
        """``Σ_i w_i v_i^{⊗order}`` for rows ``v_i``."""
        V = np.atleast_2d(np.asarray(vectors, dtype=float))
        w = np.asarray(weights, dtype=float)
        dim = V.shape[1]
        entries = {}
        for key in itertools.combinations_with_replacement(range(dim), order):
            entries[key] = float(np.dot(w, np.prod(V[:, list(key)], axis=1)))
        return cls(order, dim, entries)

    def dense(self) -> np.ndarray:
        A = np.zeros((self.dim,) * self.order)
        for key, val in self._entries.items():
            for perm in set(itertools.permutations(key)):
                A[perm] = val
        return A

    def evaluate(self, *vectors) -> float:
        """Multilinear form ``T[v_1, ..., v_k]``."""
        if len(vectors) != self.order:
            raise ValueError(f"need {self.order} vectors, got {len(vectors)}")
        out = self.dense()
        for v in vectors:
            out = np.tensordot(out, np.asarray(v, dtype=float), axes=([0], [0]))
        return float(out)

    def frobenius_sq(self) -> float:
        """``Σ_{i_1..i_k} T_{i_1..i_k}^2`` over all (unsorted) index tuples."""
        return sum(multinomial(Counter(k).values()) * v * v for k, v in self._entries.items())

    def scaled(self, s: float) -> "SymTensor":
        return SymTensor(self.order, self.dim, {k: s * v for k, v in self._entries.items()})

    def __add__(self, other: "SymTensor") -> "SymTensor":
        if (self.order, self.dim) != (other.order, other.dim):
            raise ValueError("shape mismatch")
        out = dict(self._entries)
        for k, v in other._entries.items():
            out[k] = out.get(k, 0.0) + v
        return SymTensor(self.order, self.dim, out)

    def contract_trace(self) -> "SymTensor":
        """Trace over the last two slots: ``T_{..ii}`` summed over ``i``."""
        if self.order < 2:
            raise ValueError("trace needs order >= 2")
        out = {}
        for key in itertools.combinations_with_replacement(range(self.dim), self.order - 2):
            out[key] = sum(self[key + (i, i)] for i in range(self.dim))
        return SymTensor(self.order - 2, self.dim, out)

    def op_norm_estimate(self, iters: int = 200, restarts: int = 8, seed: int = 0) -> float:
        """Power-iteration lower estimate of ``sup_{|u|=1} |T[u^k]|`` (diagnostics only)."""
        if self.order == 0:
            return abs(self[()])
        poly = tensor_to_poly(self)
        grads = poly.grad()
        rng = np.random.default_rng(seed)
        best = 0.0
        for _ in range(restarts):
            u = rng.standard_normal(self.dim)
            u /= np.linalg.norm(u)
            for _ in range(iters):
                g = np.array([gi(u) for gi in grads])
                n = np.linalg.norm(g)
                if n == 0.0:
                    break
                u_new = g / n * np.sign(poly(u) or 1.0)
                if np.allclose(u_new, u, atol=1e-13):
                    break
                u = u_new
            best = max(best, abs(poly(u)))
        return best


def symmetrize(raw_entries: Iterable[tuple], order: int, dim: int) -> SymTensor:
    """Build a tensor from one representative per permutation class.

    Parameters
    ----------
    raw_entries : iterable of (index tuple, value)
        0-based indices in any order.
    """
    entries: dict[tuple, float] = {}
    origin: dict[tuple, tuple] = {}
    for idx, val in raw_entries:
        idx = tuple(int(i) for i in idx)
        if len(idx) != order:
            raise ValueError(f"index {idx} has length {len(idx)}, expected {order}")
        bad = [i for i in idx if i < 0 or i >= dim]
        if bad:
            raise ValueError(f"index {idx} out of range for dim {dim}")
        key = tuple(sorted(idx))
        if key in origin:
            raise ValueError(f"indices {origin[key]} and {idx} are the same permutation class")
        origin[key] = idx
        entries[key] = float(val)
    return SymTensor(order, dim, entries)


def tensor_to_poly(T: SymTensor, order: int | None = None) -> Polynomial:
    """Polynomial ``x ↦ T[x^{⊗k}]``."""
    terms = {}
    for key, val in T.items():
        exp = _index_to_exp(key, T.dim)
        terms[exp] = val * multinomial(exp)
    if T.order == 0 and not terms:
        return Polynomial.zero(T.dim, order)
    return Polynomial.from_terms(T.dim, terms, order)


def poly_to_tensor(p: Polynomial, k: int) -> SymTensor:
    """Inverse of :func:`tensor_to_poly` on the degree-``k`` part of a scalar polynomial."""
    if p.order is not None:
        raise ValueError("poly_to_tensor needs a scalar-ring polynomial")
    entries = {}
    for exp, c in p.homogeneous(k).items():
        entries[_exp_to_index(exp)] = c / multinomial(exp)
    return SymTensor(k, p.dim, entries)


def lower_slot(T: SymTensor) -> list[SymTensor]:
    """Components of ``x ↦ T[x^{⊗(k-1)}, ·]`` as order-``k-1`` tensors."""
    if T.order < 1:
        raise ValueError("lower_slot needs order >= 1")
    out = []
    for i in range(T.dim):
        entries = {}
        for key in itertools.combinations_with_replacement(range(T.dim), T.order - 1):
            entries[key] = T[key + (i,)]
        out.append(SymTensor(T.order - 1, T.dim, entries))
    return out
