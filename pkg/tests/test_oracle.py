import numpy as np
import pytest
import scipy.special as special

from hdapprox.approx import find_mode
from hdapprox.error import DegenerateWeights, DimensionTooLarge, OutOfSupport
from hdapprox.models import QuadraticTarget, StirlingModel, simulate_logistic
from hdapprox.oracle import (
    CLOSED_FORM,
    IMPORTANCE_SAMPLING,
    QUADRATURE,
    closed_form_density,
    closed_form_log_normalizer,
    importance_log_normalizer,
    quadrature_log_marginal,
    quadrature_log_normalizer,
)


def test_quadrature_gaussian_integral():
    model = QuadraticTarget.isotropic(4, 1)
    estimate = quadrature_log_normalizer(model, find_mode(model))
    assert estimate.value == pytest.approx(0.5 * np.log(2 * np.pi / 4), abs=1e-11)
    assert estimate.method == QUADRATURE
    assert estimate.cost > 0


def test_quadrature_stirling():
    model = StirlingModel(5)
    estimate = quadrature_log_normalizer(model, find_mode(model))
    expected = special.gammaln(5) - 5 * np.log(5) + 5
    assert expected == pytest.approx(0.13087, abs=1e-5)
    assert estimate.value == pytest.approx(expected, abs=1e-8)


def test_quadrature_two_dimensional():
    model = QuadraticTarget(np.array([[3.0, 1.0], [1.0, 2.0]]), np.array([0.5, -0.5]))
    estimate = quadrature_log_normalizer(model, find_mode(model))
    assert estimate.value == pytest.approx(model.exact_log_normalizer(), abs=1e-9)


def test_quadrature_dimension_guard():
    model = QuadraticTarget.isotropic(10, 4)
    with pytest.raises(DimensionTooLarge):
        quadrature_log_normalizer(model, find_mode(model))


def test_quadrature_marginal():
    model = QuadraticTarget(np.array([[2.0, 0.5], [0.5, 1.0]]), np.array([1.0, -1.0]))
    mode = find_mode(model)
    for psi in (0.0, 1.0, 1.7):
        estimate = quadrature_log_marginal(model, mode, 0, psi)
        assert estimate.value == pytest.approx(
            model.exact_marginal_log_density(0, psi), abs=1e-8
        )


def test_importance_sampling_quadratic():
    model = QuadraticTarget.isotropic(50, 10, np.linspace(-1.0, 1.0, 10))
    estimate = importance_log_normalizer(model, find_mode(model), draws=100000, scale=1.0)
    assert estimate.method == IMPORTANCE_SAMPLING
    assert estimate.std_error < 1e-3
    assert abs(estimate.value - model.exact_log_normalizer()) <= 3 * estimate.std_error + 1e-10


def test_importance_sampling_stirling():
    model = StirlingModel(10)
    estimate = importance_log_normalizer(model, find_mode(model), draws=1000000, seed=3)
    assert abs(estimate.value - model.exact_log_normalizer()) <= 4 * estimate.std_error
    assert estimate.cost == 1000000


def test_importance_sampling_seeds_agree():
    model = simulate_logistic(500, 8, seed=12)
    mode = find_mode(model)
    a = importance_log_normalizer(model, mode, draws=50000, seed=1)
    b = importance_log_normalizer(model, mode, draws=50000, seed=2)
    assert abs(a.value - b.value) <= 4 * np.hypot(a.std_error, b.std_error)


def test_importance_sampling_is_deterministic():
    model = StirlingModel(4)
    mode = find_mode(model)
    a = importance_log_normalizer(model, mode, draws=5000, seed=9)
    b = importance_log_normalizer(model, mode, draws=5000, seed=9)
    assert a == b


def test_importance_sampling_guards():
    model = QuadraticTarget.isotropic(10, 10)
    mode = find_mode(model)
    with pytest.raises(ValueError):
        importance_log_normalizer(model, mode, draws=999)
    with pytest.raises(DegenerateWeights):
        importance_log_normalizer(model, mode, draws=1000, scale=0.1)


def test_closed_form_density():
    assert closed_form_density("gamma", {"n": 1}, 1.0) == pytest.approx(-1.0)
    assert closed_form_density("normal", {"mean": 0.0, "var": 4.0}, 0.0) == pytest.approx(
        -0.5 * np.log(8 * np.pi)
    )
    assert closed_form_density(
        "exp-means-conditional", {"m": 2, "total": 1.0}, 0.5
    ) == pytest.approx(np.log(1.5))
    cov = np.array([[1.0, 0.2], [0.2, 1.0]])
    assert np.isfinite(closed_form_density("normal", {"cov": cov}, [0.1, 0.1]))
    assert closed_form_density("inverse-normal", {"mu": 1.0, "lam": 1.0}, 1.0) == pytest.approx(
        -0.5 * np.log(2 * np.pi)
    )


def test_closed_form_density_errors():
    with pytest.raises(OutOfSupport):
        closed_form_density("gamma", {"n": 2}, -1.0)
    with pytest.raises(OutOfSupport):
        closed_form_density("exp-means-conditional", {"m": 2, "total": 1.0}, 1.0)
    with pytest.raises(ValueError):
        closed_form_density("cauchy", {}, 0.0)


def test_closed_form_log_normalizer():
    estimate = closed_form_log_normalizer(StirlingModel(3))
    assert estimate.method == CLOSED_FORM
    assert estimate.std_error == 0.0
    with pytest.raises(ValueError):
        closed_form_log_normalizer(simulate_logistic(20, 2, seed=0))


def test_importance_sampling_matches_quadrature():
    model = simulate_logistic(200, 2, seed=3)
    mode = find_mode(model)
    reference = quadrature_log_normalizer(model, mode).value
    for scale in (1.1, 1.2, 1.5):
        estimate = importance_log_normalizer(model, mode, draws=200000, scale=scale, seed=4)
        assert estimate.std_error < 5e-3
        assert abs(estimate.value - reference) <= 4 * estimate.std_error + 1e-6
