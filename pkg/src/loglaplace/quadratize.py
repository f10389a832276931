"""Quadratization path: polynomial changes of variables down to a Gaussian integral.

The exponent ``λ f - log g`` is rewritten as ``λ E(t)`` with ``ε = d/λ`` kept as a
formal series variable and ``1/λ = ε/d`` (d is concrete). Coefficients of
``ε^ℓ t^α`` survive only while ``|α| + 2ℓ <= 2L + 1``; every discarded entry
is of higher order in ``λ^{-1}`` than ``b_{L-1}`` needs.

Stage 0 removes the Taylor terms of f of degree 3..2L+1 with maps
``x = t + p(t)``; the log-Jacobian and ``log g ∘ X`` then enter at ``ε^1``.
Stage ``m`` (1..L-1) removes the ``ε^m`` part of every degree-``>= 3`` term.
What remains is ``ε J₁·t + ½ tᵀ(I + 2ε J₂)t``, integrated in closed form.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import series as S
from .model import ExpansionResult, Model
from .poly import Polynomial, PolyMap, compose, compose_maps, poly_multiply
from .series import EpsSeries

ZERO_TOL = 1e-12
EPS_WEIGHT = 2


def _xcap(L: int) -> int:
    return 2 * L + 1


@dataclass(frozen=True)
class GradedExponent:
    """Exponent ``E_m(t)`` with ε-series coefficients.

    Attributes
    ----------
    poly : Polynomial
        ε-series ring of order ``L``.
    stage : int
        ``m``: every term of degree ``>= 3`` has ε-order ``>= m``.
    degree_cap, eps_weight : int
        Truncation rule in force (``|α| + eps_weight·ℓ <= degree_cap``).
    """

    poly: Polynomial
    stage: int
    degree_cap: int
    eps_weight: int = EPS_WEIGHT
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def L(self) -> int:
        return self.poly.order


@dataclass(frozen=True)
class SquareForm:
    """``E_L(t) = ε J₁·t + ½ tᵀ(I + 2ε J₂)t`` with ε-series entries.

    ``J1`` has shape ``(d, K)`` and ``J2`` shape ``(d, d, K)``; the last axis
    indexes powers of ε.
    """

    J1: np.ndarray
    J2: np.ndarray

    def __post_init__(self):
        if not np.array_equal(self.J2, np.swapaxes(self.J2, 0, 1)):
            raise ValueError("J2 must be symmetric at every ε-order")

    @property
    def d(self) -> int:
        return self.J1.shape[0]

    @property
    def a_series(self) -> list[EpsSeries]:
        return [EpsSeries(r) for r in self.J1]

    @property
    def B_series(self) -> list[list[EpsSeries]]:
        return [[EpsSeries(self.J2[i, j]) for j in range(self.d)] for i in range(self.d)]


def _zero_entries(p: Polynomial, degree: int, ell: int) -> Polynomial:
    c = p.coefs.copy()
    c[p.exps.sum(axis=1) == degree, ell] = 0.0
    return Polynomial(p.dim, p.exps, c, p.order)


def _slice_max(p: Polynomial, degree: int, ell: int) -> float:
    mask = p.exps.sum(axis=1) == degree
    col = 0 if p.order is None else ell
    return float(np.abs(p.coefs[mask, col]).max()) if mask.any() else 0.0


def _elimination_map(G: Polynomial, M: int, eps_power: int | None, order: int | None) -> PolyMap:
    """``t + ε^k p(t)`` with ``p = -∇G/M``, which cancels ``G`` against ``½|t|²``."""
    comps = []
    for gi in G.grad():
        p = gi * (-1.0 / M)
        if order is not None:
            p = p.as_eps(order).shift_eps(eps_power)
        comps.append(p)
    return PolyMap.from_perturbation(comps)


def initial_quadratize(model: Model) -> tuple[PolyMap, GradedExponent]:
    """Remove the degree-3..2L+1 terms of f; returns ``X`` and ``f ∘ X``."""
    L, d = model.L, model.d
    cap = _xcap(L)
    f = model.f_poly()
    scale = max(f.max_abs(), 1.0)
    X = PolyMap.identity(d)
    residuals, counts = {}, {}
    for M in range(3, cap + 1):
        G = f.homogeneous(M)
        if G.is_zero():
            continue
        step = _elimination_map(G, M, None, None)
        f = compose(f, step, cap)
        X = compose_maps(X, step, cap)
        res = _slice_max(f, M, 0)
        residuals[M] = res
        if res > ZERO_TOL * scale:
            raise ArithmeticError(f"degree-{M} residual {res:.3e} after elimination exceeds tolerance")
        f = f.without_degrees(M, M)
        counts[M] = f.nterms
    E0 = GradedExponent(f.as_eps(L), 0, cap, 0,
                        {"residuals": residuals, "monomials": counts, "scale": scale})
    return X, E0


def logdet_series(m: PolyMap, eps_order: int, degree_cap: int, eps_weight: int = 0) -> Polynomial:
    """``log det m'(t) = tr Σ_k (-1)^{k+1}/k (J - I)^k``, truncated.

    ``m`` must be the identity plus terms of degree ``>= 2`` whose ε-entries
    below ``eps_order`` vanish.
    """
    if not m.identity_part:
        raise ValueError("logdet_series needs an identity-part map")
    d, order = m.dim, m.order
    N = [[Polynomial.zero(d, order) for _ in range(d)] for _ in range(d)]
    for i, row in enumerate(m.jacobian()):
        for j, entry in enumerate(row):
            if i == j:
                entry = entry - 1.0
            N[i][j] = entry.truncate(degree_cap, eps_weight)
            if order is not None and eps_order > 0 and N[i][j].nterms:
                if np.any(N[i][j].coefs[:, :eps_order]):
                    raise ValueError("perturbation has ε-entries below the declared eps_order")
    zero = Polynomial.zero(d, order)
    out = sum((N[i][i] for i in range(d)), zero)
    P = N
    for k in range(2, degree_cap + 1):
        if all(e.is_zero() for row in P for e in row):
            break
        tr = zero
        for i in range(d):
            for j in range(d):
                if P[i][j].nterms and N[j][i].nterms:
                    tr = tr + poly_multiply(P[i][j], N[j][i], degree_cap, eps_weight)
        out = out + tr * ((-1) ** (k + 1) / k)
        if k < degree_cap:
            P = _matmul(P, N, degree_cap, eps_weight)
    return out


def _matmul(A, B, cap, w):
    d = len(A)
    out = []
    for i in range(d):
        row = []
        for j in range(d):
            acc = Polynomial.zero(A[0][0].dim, A[0][0].order)
            for k in range(d):
                if A[i][k].nterms and B[k][j].nterms:
                    acc = acc + poly_multiply(A[i][k], B[k][j], cap, w)
            row.append(acc)
        out.append(row)
    return out


def fold_stage_inputs(model: Model, X: PolyMap, residual: GradedExponent) -> GradedExponent:
    """``E₁ = f∘X - (ε/d)(log g∘X + log det X')`` in the ε-series ring."""
    L, d = model.L, model.d
    cap = _xcap(L)
    inner = 2 * L - 1
    lg = compose(model.logg_poly(), X, inner)
    ld = logdet_series(X, 0, inner)
    corr = (lg + ld).as_eps(L).shift_eps(1) * (1.0 / d)
    E1 = (residual.poly - corr).truncate(cap, EPS_WEIGHT)
    diag = {"monomials": E1.nterms, "logdet_terms": ld.nterms, "logg_terms": lg.nterms}
    return GradedExponent(E1, 1, cap, EPS_WEIGHT, diag)


def _check_grading(E: Polynomial, m: int):
    deg = E.exps.sum(axis=1)
    high = deg >= 3
    if m > 0 and high.any():
        bad = np.argwhere(E.coefs[high, :m] != 0.0)
        if bad.size:
            row, ell = bad[0]
            exp = tuple(int(v) for v in E.exps[high][row])
            raise ValueError(f"monomial exponent {exp} has nonzero ε^{ell} entry at stage {m}")


def eliminate_stage(E: GradedExponent, m: int, d: int | None = None) -> tuple[PolyMap, GradedExponent]:
    """Clear the ``ε^m`` part of every degree-``>= 3`` term; fold in ``-(ε/d) log det T'``."""
    P = E.poly
    L = P.order
    d = d if d is not None else P.dim
    if not 1 <= m <= L - 1:
        raise ValueError(f"stage m={m} outside 1..{L - 1}")
    if E.stage != m:
        raise ValueError(f"exponent is at stage {E.stage}, not {m}")
    _check_grading(P, m)
    cap = _xcap(L)
    scale = max(P.max_abs(), 1.0)
    T = PolyMap.identity(P.dim, L)
    residuals = {}
    for M in range(3, 2 * L - 2 * m + 2):
        G = P.eps_coeff(m).homogeneous(M)
        if G.is_zero():
            continue
        step = _elimination_map(G, M, m, L)
        P = compose(P, step, cap, EPS_WEIGHT)
        T = compose_maps(T, step, cap, EPS_WEIGHT)
        res = _slice_max(P, M, m)
        residuals[M] = res
        if res > ZERO_TOL * scale:
            raise ArithmeticError(f"stage {m}, degree {M}: residual {res:.3e} exceeds tolerance")
        P = _zero_entries(P, M, m)
    ld = logdet_series(T, m, 2 * L - 1, EPS_WEIGHT)
    P = (P - ld.shift_eps(1) * (1.0 / d)).truncate(cap, EPS_WEIGHT)
    _check_grading(P, m + 1)
    diag = {"residuals": residuals, "monomials": P.nterms, "map_terms": sum(c.nterms for c in T.components)}
    return T, GradedExponent(P, m + 1, cap, EPS_WEIGHT, diag)


def complete_square(E_L: GradedExponent) -> SquareForm:
    """Read off ``J₁`` and ``J₂`` from a quadratic ``E_L``."""
    P = E_L.poly
    d, K = P.dim, P.K
    scale = max(P.max_abs(), 1.0)
    deg = P.exps.sum(axis=1)
    if np.any(deg > 2):
        exp = tuple(int(v) for v in P.exps[np.argmax(deg > 2)])
        raise ValueError(f"term {exp} of degree > 2 remains; the exponent is not quadratic")
    J1 = np.zeros((d, K))
    J2 = np.zeros((d, d, K))
    quad0 = np.zeros((d, d))
    for exp, row in zip(P.exps, P.coefs):
        n = int(exp.sum())
        if n == 0:
            if np.abs(row).max() > ZERO_TOL * scale:
                raise ValueError(f"nonzero constant term {row.tolist()} in the final exponent")
        elif n == 1:
            i = int(np.argmax(exp))
            if abs(row[0]) > ZERO_TOL * scale:
                raise ValueError(f"ε^0 linear term in coordinate {i}")
            J1[i, :K - 1] = row[1:]
        else:
            idx = np.nonzero(exp)[0]
            i, j = (int(idx[0]), int(idx[0])) if idx.size == 1 else (int(idx[0]), int(idx[1]))
            half = 1.0 if i == j else 0.5
            quad0[i, j] = quad0[j, i] = row[0] * half
            J2[i, j, :K - 1] = row[1:] * half
            J2[j, i, :K - 1] = row[1:] * half
    if np.abs(quad0 - 0.5 * np.eye(d)).max() > ZERO_TOL * scale:
        raise ValueError("ε^0 quadratic part is not ½|t|²")
    return SquareForm(J1, J2)


def extract_coefficients(sq: SquareForm, d: int, L: int) -> ExpansionResult:
    """``b_k = d^k [ε^k] Q`` with ``Q = ½ d ε J₁ᵀ(I + 2εJ₂)^{-1} J₁ - ½ tr log(I + 2εJ₂)``."""
    K = L + 1
    n = sq.d
    J1 = np.zeros((n, K))
    J2 = np.zeros((n, n, K))
    w = min(K, sq.J1.shape[-1])
    J1[:, :w] = sq.J1[:, :w]
    J2[..., :w] = sq.J2[..., :w]
    B = np.zeros((n, n, K))
    B[..., 0] = np.eye(n)
    B[..., 1:] = 2.0 * J2[..., :K - 1]
    Binv = S.mat_inv(B)
    quad = S.dot(J1, S.mat_vec(Binv, J1))
    Q = -0.5 * S.trace_log_unit(B)
    Q[1:] += 0.5 * d * quad[:K - 1]
    coeffs = tuple(d ** k * Q[k] for k in range(1, L))
    return ExpansionResult(coeffs, "quadratize", {"Q_series": Q.tolist()})


def run_pipeline(model: Model) -> ExpansionResult:
    """Stage 0, fold, stages 1..L-1, completing the square, extraction."""
    t0 = time.perf_counter()
    X, E0 = initial_quadratize(model)
    E = fold_stage_inputs(model, X, E0)
    stages = {0: E0.diagnostics, "fold": E.diagnostics}
    for m in range(1, model.L):
        _, E = eliminate_stage(E, m, model.d)
        stages[m] = E.diagnostics
    sq = complete_square(E)
    res = extract_coefficients(sq, model.d, model.L)
    diag = dict(res.diagnostics)
    diag.update(stages=stages, elapsed=time.perf_counter() - t0)
    return ExpansionResult(res.coefficients, "quadratize", diag)
