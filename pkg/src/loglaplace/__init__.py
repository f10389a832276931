"""Coefficients of the Laplace log-expansion ``log I(λ) ≈ Σ_k b_k λ^{-k}``.

Two independent routes compute the ``b_k``: joint Gaussian cumulants
(:mod:`loglaplace.cumulants`) and iterated polynomial changes of variables
(:mod:`loglaplace.quadratize`). Numerical oracles in :mod:`loglaplace.oracles`
check both against brute-force integration.
"""
from .model import ExpansionResult, Model
from .poly import Polynomial, PolyMap, compose, compose_maps, poly_multiply
from .series import EpsSeries
from .tensor import SymTensor, lower_slot, symmetrize, tensor_to_poly

__all__ = [
    "EpsSeries",
    "ExpansionResult",
    "Model",
    "PolyMap",
    "Polynomial",
    "SymTensor",
    "compose",
    "compose_maps",
    "lower_slot",
    "poly_multiply",
    "symmetrize",
    "tensor_to_poly",
]
