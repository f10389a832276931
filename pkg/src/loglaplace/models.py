"""Concrete integrands: quartic, whitened logistic regression, random polynomial.

Each builder returns a :class:`LaplaceIntegrand` carrying vectorized callables for
``f`` and ``log g`` (used by the oracles) and the derivative :class:`Model`
(used by the coefficient paths).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial as P1

from .model import Model
from .poly import Polynomial
from .tensor import SymTensor

STANDARDIZATION_TOL = 1e-8
FD_TOL = 1e-5
FEATURE_RADIUS = 1.5
MAX_FEATURE_ATTEMPTS = 10


def _vectorize(fn: Callable, d: int) -> Callable:
    """Accept a single point or an ``(N, d)`` batch."""
    def wrapped(x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return float(fn(x.reshape(1, d))[0])
        return fn(x.reshape(-1, d)).reshape(x.shape[:-1])
    return wrapped


@dataclass(frozen=True)
class LaplaceIntegrand:
    """``I(λ) = (λ/2π)^{d/2} ∫ g(x) e^{-λ f(x)} dx`` for a standardized f.

    ``f`` and ``log_g`` accept a point or an ``(N, d)`` batch. ``grad`` and
    ``hess`` (optional) are analytic derivatives of f used by the
    standardization check; without them finite differences are used at the
    looser tolerance ``FD_TOL``. Radial integrands also supply ``f_radial`` and
    ``log_g_radial`` as functions of ``r = |x|``.
    """

    d: int
    f: Callable
    log_g: Callable
    model: Model
    exact_radial: bool = False
    f_radial: Callable | None = None
    log_g_radial: Callable | None = None
    grad: Callable | None = None
    hess: Callable | None = None
    rebuild: Callable[[int], Model] | None = field(default=None, compare=False)
    source: dict | None = None
    problem: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.model.d != self.d:
            raise ValueError("model dimension does not match integrand dimension")
        if self.exact_radial and (self.f_radial is None or self.log_g_radial is None):
            raise ValueError("radial integrands need f_radial and log_g_radial")
        self.check_standardized()

    def check_standardized(self):
        d = self.d
        z = np.zeros(d)
        f0 = self.f(z)
        if abs(f0) > STANDARDIZATION_TOL:
            raise ValueError(f"f(0) = {f0:.3e}, expected 0")
        if self.grad is not None and self.hess is not None:
            g, H, tol = np.asarray(self.grad(z)), np.asarray(self.hess(z)), STANDARDIZATION_TOL
        else:
            h = 1e-4
            E = np.eye(d) * h
            g = np.array([(self.f(E[i]) - self.f(-E[i])) / (2 * h) for i in range(d)])
            H = np.array([[(self.f(E[i] + E[j]) - self.f(E[i] - E[j])
                            - self.f(-E[i] + E[j]) + self.f(-E[i] - E[j])) / (4 * h * h)
                           for j in range(d)] for i in range(d)])
            tol = FD_TOL
        if np.abs(g).max() > tol:
            raise ValueError(f"gradient at 0 has size {np.abs(g).max():.3e}")
        if np.abs(H - np.eye(d)).max() > tol:
            raise ValueError(f"Hessian at 0 differs from identity by {np.abs(H - np.eye(d)).max():.3e}")

    def model_for(self, L: int) -> Model:
        """Derivative data at order bound ``L``."""
        if L == self.model.L:
            return self.model
        if self.rebuild is not None:
            return self.rebuild(L)
        if L < self.model.L:
            return self.model.with_L(L)
        raise ValueError(f"integrand carries derivatives only up to L={self.model.L}")


def _poly_derivs(p: Polynomial, d: int):
    grads = p.grad()
    hess = [[gi.partial(j) for j in range(d)] for gi in grads]

    def grad(x):
        return np.array([gi(x) for gi in grads])

    def hessian(x):
        return np.array([[h(x) for h in row] for row in hess])

    return grad, hessian


def _quartic_tensor(d: int) -> SymTensor:
    entries = {}
    for key in itertools.combinations_with_replacement(range(d), 4):
        if key[0] == key[3]:
            entries[key] = 1.0
        elif key[0] == key[1] and key[2] == key[3]:
            entries[key] = 1.0 / 3.0
    return SymTensor(4, d, entries)


def quartic_model(d: int, L: int) -> LaplaceIntegrand:
    """``f = |x|²/2 + |x|⁴/24``, ``g ≡ 1``."""
    if d < 1:
        raise ValueError("d must be >= 1")

    def build(L_):
        return Model(d, L_, {4: _quartic_tensor(d)} if L_ >= 2 else {}, {}, f"quartic d={d}")

    def f(x):
        r2 = np.einsum("ij,ij->i", x, x)
        return 0.5 * r2 + r2 * r2 / 24.0

    def grad(x):
        x = np.asarray(x, dtype=float)
        return x * (1.0 + (x @ x) / 6.0)

    def hess(x):
        x = np.asarray(x, dtype=float)
        return np.eye(d) * (1.0 + (x @ x) / 6.0) + np.outer(x, x) / 3.0

    return LaplaceIntegrand(
        d, _vectorize(f, d), _vectorize(lambda x: np.zeros(x.shape[0]), d), build(L),
        exact_radial=True,
        f_radial=lambda r: 0.5 * r * r + r ** 4 / 24.0,
        log_g_radial=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        grad=grad, hess=hess, rebuild=build,
        source={"name": "quartic", "params": {"d": d, "L": L}},
    )


def gaussian_model(d: int, L: int) -> LaplaceIntegrand:
    """``f = |x|²/2``, ``g ≡ 1``: every coefficient vanishes and ``I ≡ 1``."""
    build = lambda L_: Model(d, L_, {}, {}, f"gaussian d={d}")
    return LaplaceIntegrand(
        d, _vectorize(lambda x: 0.5 * np.einsum("ij,ij->i", x, x), d),
        _vectorize(lambda x: np.zeros(x.shape[0]), d), build(L),
        exact_radial=True,
        f_radial=lambda r: 0.5 * r * r,
        log_g_radial=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        grad=lambda x: np.asarray(x, dtype=float), hess=lambda x: np.eye(d),
        rebuild=build, source={"name": "gaussian", "params": {"d": d, "L": L}},
    )


def polynomial_integrand(model: Model, confine: float = 0.0) -> LaplaceIntegrand:
    """Integrand whose f and log g are the model's Taylor polynomials.

    ``confine·|x|^{2L+2}`` is added to f to keep the integral finite.
    """
    d, L = model.d, model.L
    fp, lp = model.f_poly(), model.logg_poly()
    power = L + 1

    def f(x):
        r2 = np.einsum("ij,ij->i", x, x)
        return fp(x) + confine * r2 ** power

    grad0, hess0 = _poly_derivs(fp, d)

    def grad(x):
        x = np.asarray(x, dtype=float)
        r2 = x @ x
        return grad0(x) + confine * 2 * power * r2 ** (power - 1) * x

    def hess(x):
        x = np.asarray(x, dtype=float)
        r2 = x @ x
        extra = 2 * power * r2 ** (power - 1) * np.eye(d)
        if power >= 2:
            extra = extra + 4 * power * (power - 1) * r2 ** (power - 2) * np.outer(x, x)
        return hess0(x) + confine * extra

    return LaplaceIntegrand(d, _vectorize(f, d), _vectorize(lambda x: lp(x), d), model,
                            grad=grad, hess=hess)


def _random_tensor(rng: np.random.Generator, k: int, d: int, scale: float) -> SymTensor:
    keys = list(itertools.combinations_with_replacement(range(d), k))
    vals = rng.uniform(-scale, scale, size=len(keys))
    return SymTensor(k, d, dict(zip(keys, vals)))


def random_poly_model(d: int, L: int, seed: int, scale: float = 0.1) -> LaplaceIntegrand:
    """Seeded random tensors with entries uniform in ``[-scale, scale]``.

    f has orders 3..2L+1, log g orders 1..2L-1, and f carries the
    confining term ``scale·|x|^{2L+2}``.
    """
    rng = np.random.default_rng(seed)
    f_t = {k: _random_tensor(rng, k, d, scale) for k in range(3, 2 * L + 2)}
    g_t = {k: _random_tensor(rng, k, d, scale) for k in range(1, 2 * L)}
    model = Model(d, L, f_t, g_t, f"random d={d} L={L} seed={seed} scale={scale}")
    base = polynomial_integrand(model, confine=scale)
    return LaplaceIntegrand(
        d, base.f, base.log_g, model, grad=base.grad, hess=base.hess,
        source={"name": "random", "params": {"d": d, "L": L, "seed": seed, "scale": scale}},
    )


# -- logistic regression ---------------------------------------------------------

def _sigmoid(t):
    return 0.5 * (1.0 + np.tanh(0.5 * t))


def logistic_derivative_polys(kmax: int) -> list[P1]:
    """``ψ^{(k)} = P_k(σ)`` for ``ψ = log(1+e^t)``; ``P_1(σ) = σ`` and
    ``P_{k+1}(σ) = P_k'(σ)·σ(1-σ)``."""
    out = [P1([0.0]), P1([0.0, 1.0])]
    s1s = P1([0.0, 1.0, -1.0])
    for _ in range(2, kmax + 1):
        out.append(out[-1].deriv() * s1s)
    return out


class Link:
    """Convex link ``ψ`` and its derivatives."""

    def __init__(self, name: str, kmax: int = 9):
        if name not in ("logistic", "quadratic"):
            raise ValueError(f"unknown link {name!r}; use 'logistic' or 'quadratic'")
        self.name = name
        self._polys = logistic_derivative_polys(kmax) if name == "logistic" else None

    def value(self, t):
        t = np.asarray(t, dtype=float)
        return np.logaddexp(0.0, t) if self.name == "logistic" else 0.5 * t * t

    def deriv(self, t, k: int):
        t = np.asarray(t, dtype=float)
        if k == 0:
            return self.value(t)
        if self.name == "quadratic":
            return t if k == 1 else (np.ones_like(t) if k == 2 else np.zeros_like(t))
        if k >= len(self._polys):
            self._polys = logistic_derivative_polys(k)
        return self._polys[k](_sigmoid(t))


def draw_features(n: int, d: int, seed: int) -> np.ndarray:
    """``n`` features uniform on the sphere of radius 1.5 (PCG64 via ``default_rng``).

    Rows for smaller ``n`` are prefixes of those for larger ``n`` under the
    same seed. Redraws (continuing the stream) until the rows span ``R^d``.
    """
    rng = np.random.default_rng(seed)
    for _ in range(MAX_FEATURE_ATTEMPTS):
        Z = rng.standard_normal((n, d))
        X = FEATURE_RADIUS * Z / np.linalg.norm(Z, axis=1, keepdims=True)
        if np.linalg.matrix_rank(X) == d:
            return X
    raise ValueError(f"features failed to span R^{d} after {MAX_FEATURE_ATTEMPTS} draws")


@dataclass(frozen=True)
class LogisticProblem:
    """Raw pieces of the idealized loss ``ℓ(x) = (1/n)Σ[ψ(X_iᵀx) - ψ'(X_iᵀx*)X_iᵀx]``."""

    X: np.ndarray
    x_star: np.ndarray
    link: Link
    H: np.ndarray
    H_inv_sqrt: np.ndarray

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def loss(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        S = x @ self.X.T
        slope = self.link.deriv(self.X @ self.x_star, 1)
        return self.link.value(S).mean(axis=1) - (S * slope).mean(axis=1)

    def loss_at_min(self) -> float:
        return float(self.loss(self.x_star)[0])


def logreg_problem(n: int, d: int, seed: int, x_star=None, psi: str = "logistic",
                   X: np.ndarray | None = None) -> LogisticProblem:
    if n < d:
        raise ValueError("need n >= d")
    x_star = default_x_star(d) if x_star is None else np.asarray(x_star, dtype=float)
    if x_star.shape != (d,):
        raise ValueError(f"x_star must have length {d}")
    X = draw_features(n, d, seed) if X is None else np.asarray(X, dtype=float)
    gram = X.T @ X / n
    if np.linalg.eigvalsh(gram).min() < 1e-8:
        raise ValueError("feature second-moment matrix is nearly singular (min eigenvalue < 1e-8)")
    link = Link(psi)
    w = link.deriv(X @ x_star, 2)
    H = (X * w[:, None]).T @ X / n
    evals, evecs = np.linalg.eigh(H)
    if evals.min() <= 0:
        raise ValueError("Hessian at the minimizer is not positive definite")
    H_inv_sqrt = (evecs / np.sqrt(evals)) @ evecs.T
    return LogisticProblem(X, x_star, link, H, H_inv_sqrt)


def default_x_star(d: int) -> np.ndarray:
    return np.array([0.5 * (-0.5) ** i for i in range(d)])


def logreg_model(n: int, d: int, seed: int, x_star=None, psi: str = "logistic",
                 L: int = 2, X: np.ndarray | None = None) -> LaplaceIntegrand:
    """Whitened loss ``f(x) = ℓ(H^{-1/2}x + x*) - ℓ(x*)`` with ``g ≡ 1``."""
    prob = logreg_problem(n, d, seed, x_star, psi, X)
    W = prob.X @ prob.H_inv_sqrt          # rows H^{-1/2} X_i (H is symmetric)
    s_star = prob.X @ prob.x_star
    l_star = prob.loss_at_min()

    def build(L_):
        tensors = {k: SymTensor.rank_one_sum(prob.link.deriv(s_star, k) / prob.n, W, k)
                   for k in range(3, 2 * L_ + 2)}
        return Model(d, L_, tensors, {}, f"logreg n={n} d={d} seed={seed} psi={psi}")

    def f(y):
        return prob.loss(y @ prob.H_inv_sqrt + prob.x_star) - l_star

    def grad(y):
        z = np.asarray(y) @ prob.H_inv_sqrt + prob.x_star
        r = prob.link.deriv(prob.X @ z, 1) - prob.link.deriv(s_star, 1)
        return prob.H_inv_sqrt @ (prob.X.T @ r) / prob.n

    def hess(y):
        z = np.asarray(y) @ prob.H_inv_sqrt + prob.x_star
        w = prob.link.deriv(prob.X @ z, 2)
        return (W * w[:, None]).T @ W / prob.n

    params = {"n": n, "d": d, "seed": seed, "x_star": [float(v) for v in prob.x_star],
              "psi": psi, "L": L}
    return LaplaceIntegrand(
        d, _vectorize(f, d), _vectorize(lambda x: np.zeros(x.shape[0]), d), build(L),
        grad=grad, hess=hess, rebuild=build, source={"name": "logreg", "params": params},
        problem=prob,
    )


def log_evidence_terms(prob: LogisticProblem, n: int) -> float:
    """``-nℓ(x*) - ½ log det H - (d/2) log(n/2π)``: the first line of the log-evidence expansion."""
    d = prob.X.shape[1]
    _, logdet = np.linalg.slogdet(prob.H)
    return -n * prob.loss_at_min() - 0.5 * logdet - 0.5 * d * math.log(n / (2 * math.pi))


def build_integrand(name: str, params: dict) -> LaplaceIntegrand:
    """Rebuild a named integrand from its parameters."""
    params = dict(params)
    if name == "quartic":
        return quartic_model(int(params["d"]), int(params["L"]))
    if name == "gaussian":
        return gaussian_model(int(params["d"]), int(params["L"]))
    if name == "random":
        return random_poly_model(int(params["d"]), int(params["L"]), int(params["seed"]),
                                 float(params.get("scale", 0.1)))
    if name == "logreg":
        return logreg_model(int(params["n"]), int(params["d"]), int(params["seed"]),
                            params.get("x_star"), params.get("psi", "logistic"),
                            int(params.get("L", 2)))
    raise ValueError(f"unknown builtin {name!r}")
