"""Kernel dispatch: compiled extension when importable, numpy otherwise.

Set ``LOGLAPLACE_PURE_PYTHON=1`` to force the numpy kernels at import.
"""
from __future__ import annotations

import contextlib
import os

from . import _pykernels

try:
    if os.environ.get("LOGLAPLACE_PURE_PYTHON"):
        raise ImportError("pure-Python kernels requested")
    from . import _ckernels
except ImportError:
    _ckernels = None

BACKENDS = ("cython", "numpy") if _ckernels is not None else ("numpy",)
_active = BACKENDS[0]


def active() -> str:
    return _active


@contextlib.contextmanager
def use(name: str):
    """Temporarily switch kernels; used by the benchmark and the parity tests."""
    global _active
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {BACKENDS}")
    prev, _active = _active, name
    try:
        yield
    finally:
        _active = prev


def poly_mul(ea, ca, eb, cb, degree_cap: int, eps_weight: int = 0):
    if _active == "cython":
        try:
            return _ckernels.poly_mul(ea, ca, eb, cb, int(degree_cap), int(eps_weight))
        except OverflowError:
            pass
    return _pykernels.poly_mul(ea, ca, eb, cb, int(degree_cap), int(eps_weight))
