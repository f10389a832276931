import math

import numpy as np
import pytest
from conftest import rel_gap
from scipy import integrate

from loglaplace.cumulants import expand
from loglaplace.model import Model
from loglaplace.models import gaussian_model, quartic_model, random_poly_model
from loglaplace.poly import Polynomial, PolyMap
from loglaplace.quadratize import (EPS_WEIGHT, GradedExponent, SquareForm, complete_square,
                                   eliminate_stage, extract_coefficients, fold_stage_inputs,
                                   initial_quadratize, logdet_series, run_pipeline)
from loglaplace.series import EpsSeries
from loglaplace.tensor import SymTensor


def half_norm(d, order=None):
    return Polynomial.from_terms(d, {tuple(2 if j == i else 0 for j in range(d)): 0.5
                                     for i in range(d)}, order)


def test_initial_gaussian_is_identity():
    X, E0 = initial_quadratize(Model(3, 2))
    assert all(p.is_zero() for p in X.perturbation())
    assert E0.poly == half_norm(3, 2)


@pytest.mark.parametrize("c", [0.5, -1.3])
def test_initial_cubic_map(c):
    m = Model(1, 1, {3: SymTensor(3, 1, {(0, 0, 0): c})})
    X, E0 = initial_quadratize(m)
    assert X.components[0][(2,)] == pytest.approx(-c / 6, rel=1e-15)
    assert E0.poly.eps_coeff(0).homogeneous(3).is_zero()


def test_initial_quartic_residual(rng):
    m = quartic_model(3, 2).model
    X, E0 = initial_quadratize(m)
    for p in X.perturbation():
        assert set(int(s) for s in p.exps.sum(axis=1)) == {3}
    f = m.f_poly()
    for _ in range(20):
        u = rng.standard_normal(3)
        t = 0.1 * u / np.linalg.norm(u)
        gap = abs(f(X(t)) - 0.5 * t @ t)
        assert gap <= 10 * np.linalg.norm(t) ** 6


def test_initial_residual_postcondition(random_models):
    for m in random_models[:15]:
        _, E0 = initial_quadratize(m)
        P = E0.poly
        deg = P.exps.sum(axis=1)
        assert not np.any(P.coefs[(deg >= 3) & (deg <= 2 * m.L + 1)])


def test_logdet_identity_is_zero():
    assert logdet_series(PolyMap.identity(2), 0, 5).is_zero()


def test_logdet_scalar_series():
    beta = 0.8
    m = PolyMap.from_perturbation([Polynomial.from_terms(1, {(2,): beta})])
    ld = logdet_series(m, 0, 4)
    want = {1: 2 * beta, 2: -2 * beta ** 2, 3: 8 / 3 * beta ** 3, 4: -4 * beta ** 4}
    for k, v in want.items():
        assert ld[(k,)] == pytest.approx(v, rel=1e-14)
    t = 0.01
    assert abs(ld(np.array([t])) - math.log1p(2 * beta * t)) < 1e-9


def test_logdet_truncation_rate():
    beta, N = 1.0, 4
    m = PolyMap.from_perturbation([Polynomial.from_terms(1, {(2,): beta, (3,): -0.4})])
    ld = logdet_series(m, 0, N)

    def err(t):
        return abs(ld(np.array([t])) - math.log(1 + 2 * beta * t - 1.2 * t * t))

    for t in (0.04, 0.02, 0.01):
        assert err(t) / err(t / 2) >= 2 ** (N - 0.5)


def test_logdet_matches_numeric_det(rng):
    d, L = 2, 3
    comps = []
    for _ in range(d):
        terms = {(2, 0): rng.uniform(-1, 1), (1, 1): rng.uniform(-1, 1), (0, 2): rng.uniform(-1, 1)}
        comps.append(Polynomial.from_terms(d, terms).as_eps(L).shift_eps(1))
    m = PolyMap.from_perturbation(comps)
    ld = logdet_series(m, 1, 6)
    eps = 0.1
    for _ in range(5):
        u = rng.standard_normal(d)
        t = 0.01 * u / np.linalg.norm(u)
        J = np.array([[e.eval_at_eps(t, eps) for e in row] for row in m.jacobian()])
        assert abs(ld.eval_at_eps(t, eps) - np.log(np.linalg.det(J))) < 1e-10


def test_logdet_rejects_low_eps_entries():
    p = Polynomial.from_terms(1, {(2,): EpsSeries([1.0, 0.0, 0.0])}, order=2)
    with pytest.raises(ValueError):
        logdet_series(PolyMap.from_perturbation([p]), 1, 3)


def test_logdet_stage0_scales_with_d():
    per_d = []
    for d in range(1, 5):
        X, _ = initial_quadratize(quartic_model(d, 2).model)
        per_d.append(logdet_series(X, 0, 3).max_abs() / d)
    assert max(per_d) <= 1.0
    assert max(per_d) / min(per_d) <= 4.0


def test_fold_gaussian():
    m = Model(2, 2)
    X, E0 = initial_quadratize(m)
    assert fold_stage_inputs(m, X, E0).poly == half_norm(2, 2)


def test_fold_linear_log_g():
    v = np.array([0.3, -0.6, 1.0])
    m = Model(3, 2, logg_tensors={1: SymTensor(1, 3, {(i,): v[i] for i in range(3)})})
    X, E0 = initial_quadratize(m)
    E1 = fold_stage_inputs(m, X, E0)
    want = half_norm(3, 2) - Polynomial.from_terms(
        3, {tuple(int(i == j) for j in range(3)): v[i] / 3 for i in range(3)}).as_eps(2).shift_eps(1)
    assert E1.poly.allclose(want, rtol=1e-15)
    assert E1.stage == 1


def test_fold_quartic_eps1_is_logdet():
    m = quartic_model(1, 2).model
    X, E0 = initial_quadratize(m)
    E1 = fold_stage_inputs(m, X, E0)
    ld = logdet_series(X, 0, 3)
    assert E1.poly.eps_coeff(1).allclose(ld * -1.0, rtol=1e-14)
    assert E1.poly.eps_coeff(1)[(1,)] == ld[(1,)] == 0.0


def toy_exponent(gamma):
    P = Polynomial.from_terms(1, {(2,): EpsSeries([0.5, 0.0, 0.0]),
                                  (3,): EpsSeries([0.0, gamma, 0.0])}, order=2)
    return GradedExponent(P, 1, 5, EPS_WEIGHT)


def test_eliminate_toy():
    gamma = 0.7
    T, E2 = eliminate_stage(toy_exponent(gamma), 1, d=1)
    assert T.components[0][(2,)].allclose(EpsSeries([0.0, -gamma, 0.0]))
    assert E2.stage == 2
    cubic = E2.poly.homogeneous(3)
    assert cubic.is_zero() or cubic.eps_coeff(1).max_abs() == 0.0


def test_eliminate_quadratic_is_noop():
    P = half_norm(2, 3) + Polynomial.from_terms(2, {(1, 0): EpsSeries([0.0, 0.2, 0.1, 0.0])}, order=3)
    T, E2 = eliminate_stage(GradedExponent(P, 1, 7, EPS_WEIGHT), 1)
    assert all(p.is_zero() for p in T.perturbation())
    assert E2.poly == P


def test_eliminate_rejects_bad_grading():
    P = Polynomial.from_terms(1, {(2,): EpsSeries([0.5, 0.0, 0.0]),
                                  (3,): EpsSeries([0.2, 0.0, 0.0])}, order=2)
    with pytest.raises(ValueError, match=r"\(3,\)"):
        eliminate_stage(GradedExponent(P, 1, 5, EPS_WEIGHT), 1)


def test_eliminate_stage_checks():
    with pytest.raises(ValueError):
        eliminate_stage(toy_exponent(0.1), 2)


def test_stages_leave_quadratic_and_graded(random_models):
    for m in random_models[:12]:
        X, E0 = initial_quadratize(m)
        E = fold_stage_inputs(m, X, E0)
        for stage in range(1, m.L):
            _, E = eliminate_stage(E, stage, m.d)
            deg = E.poly.exps.sum(axis=1)
            assert not np.any(E.poly.coefs[deg >= 3, :stage + 1])
        assert E.poly.degree <= 2


def test_complete_square_examples():
    sq = complete_square(GradedExponent(half_norm(2, 2), 2, 5))
    assert not sq.J1.any() and not sq.J2.any()
    v = [0.5, -2.0]
    lin = Polynomial.from_terms(2, {(1, 0): v[0], (0, 1): v[1]}).as_eps(2).shift_eps(1)
    sq = complete_square(GradedExponent(half_norm(2, 2) + lin, 2, 5))
    assert np.allclose(sq.J1[:, 0], v) and not sq.J2.any()
    assert [s[0] for s in sq.a_series] == v


def test_complete_square_off_diagonal():
    P = half_norm(2, 1) + Polynomial.from_terms(2, {(1, 1): 0.6, (2, 0): 0.1}).as_eps(1).shift_eps(1)
    sq = complete_square(GradedExponent(P, 1, 3))
    assert sq.J2[0, 1, 0] == sq.J2[1, 0, 0] == 0.3 and sq.J2[0, 0, 0] == 0.1


def test_complete_square_rejects():
    cubic = Polynomial.from_terms(1, {(3,): EpsSeries([0.0, 1.0])}, order=1)
    with pytest.raises(ValueError, match="degree > 2"):
        complete_square(GradedExponent(half_norm(1, 1) + cubic, 1, 3))
    with pytest.raises(ValueError):
        complete_square(GradedExponent(half_norm(1, 1) * 2.0, 1, 3))
    with pytest.raises(ValueError):
        SquareForm(np.zeros((2, 2)), np.arange(8.0).reshape(2, 2, 2))


def test_extract_zero():
    res = extract_coefficients(SquareForm(np.zeros((2, 4)), np.zeros((2, 2, 4))), 2, 4)
    assert res.coefficients == (0.0, 0.0, 0.0)


def test_extract_scalar_quadratic():
    beta = 0.3
    J2 = np.zeros((1, 1, 3))
    J2[0, 0, 0] = beta
    res = extract_coefficients(SquareForm(np.zeros((1, 3)), J2), 1, 3)
    assert res.coefficients[0] == pytest.approx(-beta, rel=1e-15)
    assert res.coefficients[1] == pytest.approx(beta ** 2, rel=1e-15)
    lam = 200.0
    val, _ = integrate.quad(lambda t: math.sqrt(lam / (2 * math.pi))
                            * math.exp(-lam * (0.5 * t * t + beta * t * t / lam)), -np.inf, np.inf,
                            epsabs=0, epsrel=1e-13)
    approx = res.coefficients[0] / lam + res.coefficients[1] / lam ** 2
    assert abs(math.log(val) - approx) < 1e-6


@pytest.mark.parametrize("d", [1, 2, 3])
def test_pipeline_quartic(d):
    assert run_pipeline(quartic_model(d, 2).model).coefficients[0] == pytest.approx(
        -d * d / 24 - d / 12, rel=1e-12)


def test_pipeline_gaussian():
    assert run_pipeline(gaussian_model(2, 3).model).coefficients == (0.0, 0.0)
    assert run_pipeline(gaussian_model(2, 1).model).coefficients == ()


def test_pipeline_matches_cumulants_d2_L3():
    m = random_poly_model(2, 3, 5).model
    a, b = run_pipeline(m).coefficients, expand(m).coefficients
    assert all(rel_gap(x, y) <= 1e-7 for x, y in zip(a, b))


def test_pipeline_L4_matches_cumulants():
    m = random_poly_model(1, 4, 3).model
    a, b = run_pipeline(m).coefficients, expand(m).coefficients
    assert all(rel_gap(x, y) <= 1e-7 for x, y in zip(a, b))
