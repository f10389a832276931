"""Truncated power series in the formal small parameter ε = d/λ.

An :class:`EpsSeries` of order ``L`` stores ``c_0, ..., c_L`` and every ring
operation drops powers above ``ε^L``. The matrix helpers at the bottom work on
plain arrays whose last axis is the ε-index; they back the final
completing-the-square step.
"""
from __future__ import annotations

import numpy as np


def _conv(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    K = a.shape[-1]
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
    for i in range(K):
        out[..., i:] += a[..., i:i + 1] * b[..., :K - i]
    return out


class EpsSeries:
    """Element of R[ε]/(ε^{L+1}); immutable."""

    __slots__ = ("_c",)

    def __init__(self, coeffs, order: int | None = None):
        c = np.array(coeffs, dtype=float).reshape(-1)
        if order is not None:
            if order < 0:
                raise ValueError("order must be non-negative")
            if c.size > order + 1:
                c = c[:order + 1]
            elif c.size < order + 1:
                c = np.concatenate([c, np.zeros(order + 1 - c.size)])
        if c.size == 0:
            raise ValueError("EpsSeries needs at least one coefficient")
        c.setflags(write=False)
        self._c = c

    @classmethod
    def scalar(cls, s: float, order: int) -> "EpsSeries":
        return cls([s], order)

    @classmethod
    def eps(cls, order: int, power: int = 1) -> "EpsSeries":
        """The monomial ε^power (zero if power > order)."""
        c = np.zeros(order + 1)
        if power <= order:
            c[power] = 1.0
        return cls(c)

    @property
    def coeffs(self) -> np.ndarray:
        return self._c

    @property
    def order(self) -> int:
        return self._c.size - 1

    def __getitem__(self, k: int) -> float:
        return float(self._c[k]) if 0 <= k <= self.order else 0.0

    def __len__(self):
        return self._c.size

    def __iter__(self):
        return iter(self._c.tolist())

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, EpsSeries):
            if other.order != self.order:
                raise ValueError(f"order mismatch: {self.order} vs {other.order}")
            return other._c
        if np.isscalar(other):
            c = np.zeros_like(self._c)
            c[0] = float(other)
            return c
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return EpsSeries(self._c + o)

    __radd__ = __add__

    def __neg__(self):
        return EpsSeries(-self._c)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return EpsSeries(self._c - o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return EpsSeries(o - self._c)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return EpsSeries(_conv(self._c, o))

    __rmul__ = __mul__

    def inverse(self) -> "EpsSeries":
        c0 = self._c[0]
        if c0 == 0.0:
            raise ZeroDivisionError("EpsSeries with zero constant term is not invertible")
        out = np.zeros_like(self._c)
        out[0] = 1.0 / c0
        for k in range(1, out.size):
            out[k] = -np.dot(self._c[1:k + 1], out[k - 1::-1][:k]) / c0
        return EpsSeries(out)

    def __truediv__(self, other):
        if isinstance(other, EpsSeries):
            return self * other.inverse()
        return EpsSeries(self._c / float(other))

    def __rtruediv__(self, other):
        return other * self.inverse()

    def shift(self, k: int = 1) -> "EpsSeries":
        """Multiply by ε^k (k may be negative if the low entries vanish)."""
        out = np.zeros_like(self._c)
        if k >= 0:
            out[k:] = self._c[:self._c.size - k] if k < self._c.size else []
        else:
            if np.any(self._c[:-k]):
                raise ValueError("cannot divide by ε: low-order entries are nonzero")
            out[:k] = self._c[-k:]
        return EpsSeries(out)

    def log(self) -> "EpsSeries":
        """log of a series with unit constant term."""
        if self._c[0] != 1.0:
            raise ValueError("log needs constant term exactly 1")
        u = self - 1.0
        out = EpsSeries.scalar(0.0, self.order)
        power = EpsSeries.scalar(1.0, self.order)
        for k in range(1, self.order + 1):
            power = power * u
            out = out + power * ((-1) ** (k + 1) / k)
        return out

    def __eq__(self, other):
        if isinstance(other, EpsSeries):
            return self.order == other.order and np.array_equal(self._c, other._c)
        if np.isscalar(other):
            return self._c[0] == other and not np.any(self._c[1:])
        return NotImplemented

    def __hash__(self):
        return hash(self._c.tobytes())

    def allclose(self, other, rtol=1e-12, atol=0.0) -> bool:
        return np.allclose(self._c, self._coerce(other), rtol=rtol, atol=atol)

    def __repr__(self):
        return f"EpsSeries({self._c.tolist()})"


# --- matrices / vectors of series: arrays with the ε-index last -------------

def mat_mul(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """(n, m, K) @ (m, p, K) -> (n, p, K), truncated at order K-1."""
    K = A.shape[-1]
    out = np.zeros((A.shape[0], B.shape[1], K))
    for i in range(K):
        out[..., i:] += np.einsum("ij,jkl->ikl", A[..., i], B[..., :K - i])
    return out


def mat_vec(A: np.ndarray, v: np.ndarray) -> np.ndarray:
    return mat_mul(A, v[:, None, :])[:, 0, :]


def dot(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Σ_i u_i v_i for vectors of series (d, K) -> (K,)."""
    return _conv(u, v).sum(axis=0)


def mat_inv(A: np.ndarray) -> np.ndarray:
    """Inverse of a matrix of series; needs an invertible ε^0 matrix."""
    K = A.shape[-1]
    A0 = A[..., 0]
    try:
        X0 = np.linalg.inv(A0)
    except np.linalg.LinAlgError as exc:
        raise ZeroDivisionError("ε^0 matrix is singular; series inverse undefined") from exc
    if not np.all(np.isfinite(X0)):
        raise ZeroDivisionError("ε^0 matrix is singular; series inverse undefined")
    X = np.zeros_like(A)
    X[..., 0] = X0
    for k in range(1, K):
        acc = np.zeros_like(X0)
        for j in range(1, k + 1):
            acc += A[..., j] @ X[..., k - j]
        X[..., k] = -X0 @ acc
    return X


def trace_log_unit(A: np.ndarray) -> np.ndarray:
    """tr log(I + N) for N = A - I with N vanishing at ε^0."""
    K = A.shape[-1]
    n = A.shape[0]
    N = A.copy()
    N[..., 0] -= np.eye(n)
    if np.any(N[..., 0]):
        raise ValueError("trace_log_unit expects an identity ε^0 part")
    out = np.zeros(K)
    P = N.copy()
    for k in range(1, K):
        out += ((-1) ** (k + 1) / k) * np.trace(P, axis1=0, axis2=1)
        P = mat_mul(P, N)
    return out
