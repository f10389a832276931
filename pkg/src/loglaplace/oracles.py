"""Brute-force estimates of ``log I(λ)`` and remainder sweeps.

All three oracles work in the rescaled variable ``s = √λ x`` where the
integrand is ``N(0, I)``-weighted with log-tilt

    h(s) = log g(s/√λ) - λ f(s/√λ) + |s|²/2,

so ``I(λ) = E[exp h(Z)]`` and the pure Gaussian gives ``h ≡ 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special, stats

from .cumulants import expand
from .models import LaplaceIntegrand

RADIAL_SMAX = 40.0
GHQ_MAX_POINTS = 10_000_000
GHQ_CONVERGENCE_TOL = 1e-8
GHQ_REFERENCE_DROP = 20
MC_CHUNK = 200_000
MC_MIN_SAMPLES = 1000
MC_MAX_REL_STDERR = 1e-3
FIT_NOISE_FLOOR = 1e-14


@dataclass(frozen=True)
class OracleEstimate:
    log_I: float
    std_error: float
    method: str
    lam: float
    samples_or_nodes: int
    seed: int | None = None
    converged: bool = True

    def __post_init__(self):
        if not self.std_error >= 0:
            raise ValueError("std_error must be non-negative")
        if self.method == "mc" and self.seed is None:
            raise ValueError("Monte Carlo estimates must carry their seed")


def _tilt(m: LaplaceIntegrand, lam: float, s: np.ndarray) -> np.ndarray:
    x = s / math.sqrt(lam)
    return m.log_g(x) - lam * m.f(x) + 0.5 * np.einsum("ij,ij->i", s, s)


def oracle_radial(m: LaplaceIntegrand, lam: float, rel_tol: float = 1e-12) -> OracleEstimate:
    """Adaptive 1-d quadrature of the radial integral (radial integrands only)."""
    if not m.exact_radial:
        raise ValueError("radial oracle needs an integrand that depends only on |x|")
    d = m.d
    root = math.sqrt(lam)

    def integrand(s):
        r = s / root
        h = m.log_g_radial(r) - lam * m.f_radial(r) + 0.5 * s * s
        return s ** (d - 1) * math.exp(-0.5 * s * s) * math.expm1(h)

    total = 0.0
    edges = [0.0, 2.0, 4.0, 6.0, 9.0, 13.0, 20.0, RADIAL_SMAX]
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(integrand, a, b, epsabs=0.0, epsrel=rel_tol, limit=500)
        total += val
    norm = 2.0 ** (d / 2 - 1) * special.gamma(d / 2)
    return OracleEstimate(math.log1p(total / norm), 0.0, "radial", lam, 0)


def _ghq_log(m: LaplaceIntegrand, lam: float, n: int) -> float:
    d = m.d
    z, w = np.polynomial.hermite_e.hermegauss(n)
    logw = np.log(w / math.sqrt(2 * math.pi))
    grid = np.stack(np.meshgrid(*([z] * d), indexing="ij"), axis=-1).reshape(-1, d)
    lw = sum(np.meshgrid(*([logw] * d), indexing="ij")).reshape(-1)
    vals = np.empty(grid.shape[0])
    for start in range(0, grid.shape[0], MC_CHUNK):
        sl = slice(start, start + MC_CHUNK)
        vals[sl] = _tilt(m, lam, grid[sl])
    terms = lw + vals
    if not np.all(np.isfinite(terms[np.isfinite(lw)])):
        raise FloatingPointError("non-finite integrand value on the quadrature grid")
    return float(special.logsumexp(terms))


def oracle_ghq(m: LaplaceIntegrand, lam: float, nodes_per_dim: int = 60) -> OracleEstimate:
    """Tensor Gauss-Hermite rule; flags non-convergence against ``nodes - 20`` nodes."""
    if nodes_per_dim ** m.d > GHQ_MAX_POINTS:
        raise ValueError(f"grid of {nodes_per_dim}^{m.d} points exceeds {GHQ_MAX_POINTS}")
    est = _ghq_log(m, lam, nodes_per_dim)
    ref_n = nodes_per_dim - GHQ_REFERENCE_DROP
    converged = True
    if ref_n >= 2:
        converged = abs(est - _ghq_log(m, lam, ref_n)) < GHQ_CONVERGENCE_TOL
    return OracleEstimate(est, 0.0, "ghq", lam, nodes_per_dim, converged=converged)


def oracle_mc(m: LaplaceIntegrand, lam: float, samples: int, seed: int) -> OracleEstimate:
    """Importance sampling from ``N(0, I/λ)``; ``log_I`` is the log of the sample mean."""
    if samples < MC_MIN_SAMPLES:
        raise ValueError(f"need at least {MC_MIN_SAMPLES} samples")
    rng = np.random.default_rng(seed)
    count, mean, m2 = 0, 0.0, 0.0
    left = samples
    while left:
        k = min(left, MC_CHUNK)
        s = rng.standard_normal((k, m.d))
        w = np.exp(_tilt(m, lam, s))
        bad = ~np.isfinite(w)
        if bad.any():
            x = s[np.argmax(bad)] / math.sqrt(lam)
            raise FloatingPointError(f"non-finite weight at x = {x.tolist()}")
        cm = w.mean()
        cm2 = float(((w - cm) ** 2).sum())
        delta = cm - mean
        tot = count + k
        mean += delta * k / tot
        m2 += cm2 + delta * delta * count * k / tot
        count = tot
        left -= k
    if mean <= 0:
        raise FloatingPointError("non-positive Monte Carlo mean")
    sd = math.sqrt(m2 / (count - 1))
    return OracleEstimate(math.log(mean), sd / (mean * math.sqrt(count)), "mc", lam, count, seed)


def run_oracle(m: LaplaceIntegrand, lam: float, oracle: str, *, rel_tol: float = 1e-12,
               nodes: int = 60, samples: int = 100_000, seed: int = 0) -> OracleEstimate:
    if oracle == "radial":
        return oracle_radial(m, lam, rel_tol)
    if oracle == "ghq":
        return oracle_ghq(m, lam, nodes)
    if oracle == "mc":
        return oracle_mc(m, lam, samples, seed)
    raise ValueError(f"unknown oracle {oracle!r}")


@dataclass(frozen=True)
class SweepRow:
    d: int
    lam: float
    L: int
    log_I_oracle: float
    log_I_expansion: float
    remainder: float
    oracle_std_error: float
    usable: bool = True
    note: str = ""


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    stderr: float
    intercept: float
    n_rows: int


def row_seed(seed: int, row: int) -> int:
    """Per-row Monte Carlo seed derived from ``(seed, row)``."""
    return int(np.random.SeedSequence([seed, row]).generate_state(1)[0])


def remainder_sweep(m: LaplaceIntegrand, lambdas, L: int, oracle: str = "radial", *,
                    rel_tol: float = 1e-12, nodes: int = 60, samples: int = 100_000,
                    seed: int = 0, coefficients=None) -> tuple[list[SweepRow], SlopeFit | None]:
    """Oracle minus expansion at each λ and the log-log slope of ``|remainder|``.

    Returns ``(rows, fit)``; ``fit`` is ``None`` when every remainder sits at
    the deterministic noise floor (the pure Gaussian case).
    """
    lambdas = [float(v) for v in lambdas]
    if len(lambdas) < 3:
        raise ValueError("a sweep needs at least 3 values of λ")
    if len(set(lambdas)) != len(lambdas):
        raise ValueError("duplicate λ values in sweep")
    if any(v <= 0 for v in lambdas):
        raise ValueError("λ must be positive")
    if coefficients is None:
        coefficients = expand(m.model_for(L)).coefficients
    rows = []
    for i, lam in enumerate(lambdas):
        est = run_oracle(m, lam, oracle, rel_tol=rel_tol, nodes=nodes, samples=samples,
                         seed=row_seed(seed, i))
        approx = float(sum(b * lam ** -(k + 1) for k, b in enumerate(coefficients)))
        rem = est.log_I - approx
        usable, note = True, ""
        if oracle == "mc":
            if not est.std_error < abs(rem) / 5 or est.std_error >= MC_MAX_REL_STDERR:
                usable, note = False, "Monte Carlo error too large relative to remainder"
        elif abs(rem) <= FIT_NOISE_FLOOR:
            usable, note = False, "remainder at noise floor"
        if not est.converged:
            usable, note = False, "quadrature not converged"
        rows.append(SweepRow(m.d, lam, L, est.log_I, approx, rem, est.std_error, usable, note))
    good = [r for r in rows if r.usable]
    if not good:
        if oracle == "mc" or any(not r.usable and r.note != "remainder at noise floor" for r in rows):
            raise ValueError("no usable sweep rows; use a deterministic oracle or more samples")
        return rows, None
    if len(good) < 3:
        return rows, None
    fit = stats.linregress(np.log([r.lam for r in good]), np.log([abs(r.remainder) for r in good]))
    return rows, SlopeFit(float(fit.slope), float(fit.stderr), float(fit.intercept), len(good))


def log_evidence_ghq(prob, n: int, nodes_per_dim: int = 60) -> OracleEstimate:
    """``log ∫ exp(-n ℓ(x)) dx`` for a logistic problem, by Gauss-Hermite in the original coordinates.

    Nodes sit at ``x = x* + H^{-1/2} z / √n``; the loss is evaluated directly.
    """
    d = prob.X.shape[1]
    if nodes_per_dim ** d > GHQ_MAX_POINTS:
        raise ValueError(f"grid of {nodes_per_dim}^{d} points exceeds {GHQ_MAX_POINTS}")

    def once(k):
        z, w = np.polynomial.hermite_e.hermegauss(k)
        grid = np.stack(np.meshgrid(*([z] * d), indexing="ij"), axis=-1).reshape(-1, d)
        lw = sum(np.meshgrid(*([np.log(w)] * d), indexing="ij")).reshape(-1)
        x = prob.x_star + (grid @ prob.H_inv_sqrt) / math.sqrt(n)
        vals = -n * prob.loss(x) + 0.5 * np.einsum("ij,ij->i", grid, grid)
        _, logdet = np.linalg.slogdet(prob.H)
        return float(special.logsumexp(lw + vals)) - 0.5 * logdet - 0.5 * d * math.log(n)

    est = once(nodes_per_dim)
    ref = once(nodes_per_dim - GHQ_REFERENCE_DROP) if nodes_per_dim - GHQ_REFERENCE_DROP >= 2 else est
    return OracleEstimate(est, 0.0, "ghq", float(n), nodes_per_dim,
                          converged=abs(est - ref) < GHQ_CONVERGENCE_TOL)
