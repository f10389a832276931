import numpy as np
import pytest
import sympy as sp

from loglaplace.cumulants import expand
from loglaplace.models import (Link, build_integrand, draw_features, gaussian_model,
                               logistic_derivative_polys, logreg_model, logreg_problem,
                               polynomial_integrand, quartic_model, random_poly_model)
from loglaplace.oracles import oracle_ghq
from loglaplace.poly import Polynomial
from loglaplace.quadratize import run_pipeline
from loglaplace.tensor import tensor_to_poly


def test_quartic_tensor_is_norm_fourth():
    assert tensor_to_poly(quartic_model(1, 2).model.f_tensor(4)) == Polynomial.from_terms(1, {(4,): 1.0})
    p = tensor_to_poly(quartic_model(2, 2).model.f_tensor(4))
    assert p.allclose(Polynomial.from_terms(2, {(4, 0): 1.0, (2, 2): 2.0, (0, 4): 1.0}), rtol=1e-15)
    m = quartic_model(3, 2)
    assert m.exact_radial
    assert expand(m.model).coefficients[0] == pytest.approx(-0.625, rel=1e-14)


def test_quartic_callables(rng):
    m = quartic_model(3, 3)
    x = rng.standard_normal((4, 3))
    r2 = np.sum(x * x, axis=1)
    assert np.allclose(m.f(x), r2 / 2 + r2 ** 2 / 24)
    assert np.allclose(m.f_radial(np.sqrt(r2)), m.f(x))


def test_psi_derivatives_match_symbolic():
    t = sp.symbols("t")
    psi = sp.log(1 + sp.exp(t))
    polys = logistic_derivative_polys(7)
    link = Link("logistic")
    for k in range(1, 8):
        expr = sp.diff(psi, t, k)
        for v in ("-3", "-0.4", "0", "1.7"):
            exact = float(expr.subs(t, sp.Rational(v)).evalf(40))
            assert float(link.deriv(np.array(float(v)), k)) == pytest.approx(exact, rel=1e-12, abs=1e-14)
    assert polys[4](0.5) == pytest.approx(-1 / 8)


def test_logistic_single_observation():
    m = logreg_model(1, 1, 0, x_star=[0.0], X=np.array([[1.0]]))
    assert m.model.f_tensor(3)[(0, 0, 0)] == pytest.approx(0.0, abs=1e-15)
    assert m.model.f_tensor(4)[(0, 0, 0, 0)] == pytest.approx(-2.0, rel=1e-14)
    b1 = expand(m.model).coefficients[0]
    assert b1 == pytest.approx(0.25, rel=1e-13)
    assert run_pipeline(m.model).coefficients[0] == pytest.approx(b1, rel=1e-12)
    lam = 400.0
    est = oracle_ghq(m, lam, 80)
    assert est.converged
    assert abs(est.log_I - b1 / lam) < 5 / lam ** 2


def test_quadratic_link_is_gaussian():
    m = logreg_model(50, 2, 3, psi="quadratic", L=3)
    assert all(T.frobenius_sq() == 0.0 for T in m.model.f_tensors.values())
    assert expand(m.model).coefficients == (0.0, 0.0)


def test_logistic_standardized_and_deterministic():
    a = logreg_model(200, 2, 1)
    b = logreg_model(200, 2, 1)
    assert a.model == b.model
    a.check_standardized()
    assert np.allclose(a.hess(np.zeros(2)), np.eye(2), atol=1e-8)


def test_features_nested_and_bounded():
    big, small = draw_features(400, 2, 5), draw_features(100, 2, 5)
    assert np.array_equal(big[:100], small)
    assert np.allclose(np.linalg.norm(big, axis=1), 1.5)


def test_logistic_errors():
    with pytest.raises(ValueError):
        logreg_problem(1, 2, 0)
    with pytest.raises(ValueError, match="singular"):
        logreg_problem(2, 2, 0, X=np.array([[1.0, 0.0], [2.0, 0.0]]))
    with pytest.raises(ValueError):
        Link("probit")


def test_random_model_properties():
    a, b = random_poly_model(2, 2, 7), random_poly_model(2, 2, 7)
    assert a.model == b.model
    assert a.model.max_entry() <= 0.1
    z = random_poly_model(2, 2, 7, scale=0.0).model
    assert all(T.frobenius_sq() == 0.0 for T in (*z.f_tensors.values(), *z.logg_tensors.values()))
    assert expand(z).coefficients == (0.0,)
    m = a.model
    assert expand(m).coefficients[0] == pytest.approx(run_pipeline(m).coefficients[0], rel=1e-10)


def test_standardization_rejects_shifted_f():
    base = gaussian_model(2, 2)
    with pytest.raises(ValueError):
        type(base)(2, lambda x: base.f(x) + 0.1, base.log_g, base.model)
    with pytest.raises(ValueError):
        type(base)(2, lambda x: 2 * base.f(x), base.log_g, base.model)


def test_polynomial_integrand_matches_model(rng):
    m = random_poly_model(2, 2, 4).model
    integ = polynomial_integrand(m)
    for x in rng.standard_normal((5, 2)) * 0.3:
        assert integ.f(x) == pytest.approx(m.f_poly()(x), rel=1e-13)
        assert integ.log_g(x) == pytest.approx(m.logg_poly()(x), rel=1e-13, abs=1e-15)


def test_build_integrand_round_trip():
    for name, params in [("quartic", {"d": 2, "L": 3}), ("gaussian", {"d": 1, "L": 2}),
                         ("random", {"d": 2, "L": 2, "seed": 3, "scale": 0.1}),
                         ("logreg", {"n": 60, "d": 2, "seed": 2, "L": 2})]:
        integ = build_integrand(name, params)
        assert build_integrand(integ.source["name"], integ.source["params"]).model == integ.model \
            if integ.source else True
    with pytest.raises(ValueError):
        build_integrand("cubic", {})


def test_model_for_rebuilds_logistic():
    m = logreg_model(80, 2, 0, L=2)
    m3 = m.model_for(3)
    assert m3.L == 3 and 7 in m3.f_tensors
    with pytest.raises(ValueError):
        polynomial_integrand(m.model).model_for(3)
