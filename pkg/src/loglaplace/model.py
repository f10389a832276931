"""Standardized problem instances and expansion results."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .poly import Polynomial
from .tensor import SymTensor, tensor_to_poly


@dataclass(frozen=True)
class Model:
    """Derivative data of a standardized Laplace integrand at its minimizer.

    ``f = ½|x|² + Σ_{k=3}^{2L+1} T_k[x^k]/k!`` and
    ``log g = Σ_{k=1}^{2L-1} S_k[x^k]/k!``; absent orders are zero.
    """

    d: int
    L: int
    f_tensors: Mapping[int, SymTensor] = field(default_factory=dict)
    logg_tensors: Mapping[int, SymTensor] = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.L < 1:
            raise ValueError("L must be >= 1")
        for name, tensors, lo, hi in (("f", self.f_tensors, 3, 2 * self.L + 1),
                                      ("log g", self.logg_tensors, 1, 2 * self.L - 1)):
            for k, T in tensors.items():
                if not lo <= k <= hi:
                    raise ValueError(f"{name} derivative order {k} outside {lo}..{hi} for L={self.L}")
                if T.order != k or T.dim != self.d:
                    raise ValueError(f"{name} tensor of order {k} has shape ({T.order}, {T.dim})")
        object.__setattr__(self, "f_tensors", dict(sorted(self.f_tensors.items())))
        object.__setattr__(self, "logg_tensors", dict(sorted(self.logg_tensors.items())))

    def f_tensor(self, k: int) -> SymTensor:
        return self.f_tensors.get(k) or SymTensor.zeros(k, self.d)

    def logg_tensor(self, k: int) -> SymTensor:
        return self.logg_tensors.get(k) or SymTensor.zeros(k, self.d)

    def with_L(self, L: int) -> "Model":
        """Same data under another order bound; orders outside the new range are dropped."""
        return Model(self.d, L,
                     {k: T for k, T in self.f_tensors.items() if k <= 2 * L + 1},
                     {k: T for k, T in self.logg_tensors.items() if k <= 2 * L - 1},
                     self.label)

    def f_poly(self) -> Polynomial:
        """Degree-``2L+1`` Taylor polynomial of f (including ½|x|²)."""
        p = Polynomial.from_terms(self.d, {tuple(2 if j == i else 0 for j in range(self.d)): 0.5
                                           for i in range(self.d)})
        for k, T in self.f_tensors.items():
            p = p + tensor_to_poly(T) * (1.0 / _fact(k))
        return p

    def logg_poly(self) -> Polynomial:
        """Degree-``2L-1`` Taylor polynomial of log g."""
        p = Polynomial.zero(self.d)
        for k, T in self.logg_tensors.items():
            p = p + tensor_to_poly(T) * (1.0 / _fact(k))
        return p

    def max_entry(self) -> float:
        vals = [abs(v) for T in (*self.f_tensors.values(), *self.logg_tensors.values())
                for _, v in T.items()]
        return max(vals, default=0.0)


def _fact(k: int) -> float:
    return float(np.prod(np.arange(1, k + 1)))


@dataclass(frozen=True)
class ExpansionResult:
    """Coefficients ``b_1 .. b_{L-1}`` of ``log I(λ) ≈ Σ b_k λ^{-k}``."""

    coefficients: tuple
    path: str
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(b) for b in self.coefficients))
        if self.path not in ("cumulant", "quadratize"):
            raise ValueError(f"unknown path {self.path!r}")

    def log_expansion(self, lam: float) -> float:
        return float(sum(b * lam ** -(k + 1) for k, b in enumerate(self.coefficients)))
