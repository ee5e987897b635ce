import numpy as np
import pytest

from hdapprox.error import FiniteDifferenceError
from hdapprox.model import (
    FunctionTarget,
    fd_gradient,
    verify_cumulants,
    verify_derivatives,
)
from hdapprox.models import GammaCgf, StirlingModel, simulate_gaussian, simulate_logistic


rng = np.random.default_rng(11)
logistic = simulate_logistic(200, 4, seed=3)
gaussian = simulate_gaussian(20, 3, seed=5)


def test_fd_gradient_symmetric_minimum():
    model = FunctionTarget(2, 1, lambda t: -0.5 * t @ t)
    np.testing.assert_allclose(fd_gradient(model, np.zeros(2)), np.zeros(2), atol=1e-10)


def test_fd_gradient_linear():
    a = np.array([1.0, 2.0])
    model = FunctionTarget(2, 1, lambda t: a @ t)
    for theta in rng.standard_normal((3, 2)):
        np.testing.assert_allclose(fd_gradient(model, theta), a, rtol=1e-8)


def test_fd_gradient_matches_logistic_gradient():
    theta = np.zeros(logistic.dim_p)
    fd = fd_gradient(logistic, theta)
    analytic = logistic.grad(theta)
    assert np.max(np.abs(fd - analytic)) / max(1.0, np.max(np.abs(analytic))) < 1e-5


def test_fd_reports_offending_coordinate():
    model = FunctionTarget(2, 1, lambda t: -np.inf if t[1] > 0 else -t @ t)
    with pytest.raises(FiniteDifferenceError) as info:
        fd_gradient(model, np.zeros(2))
    assert info.value.coordinate == 1


def test_verify_derivatives_gaussian():
    report = verify_derivatives(gaussian, list(rng.standard_normal((5, 3))))
    assert report.max_grad_discrepancy < 1e-8
    assert report.max_hess_discrepancy < 1e-8
    assert report.passed


def test_verify_derivatives_logistic():
    report = verify_derivatives(logistic, list(0.3 * rng.standard_normal((5, 4))))
    assert report.max_grad_discrepancy < 1e-5
    assert report.passed


def test_verify_derivatives_flags_wrong_gradient():
    model = FunctionTarget(
        2, 1, lambda t: -0.5 * t @ t - t[0] ** 4, grad=lambda t: 2.0 * (-t - [4 * t[0] ** 3, 0])
    )
    report = verify_derivatives(model, [np.array([0.5, -1.0])])
    assert not report.passed
    assert report.max_grad_discrepancy > 0.1


def test_verify_derivatives_needs_samples():
    with pytest.raises(ValueError):
        verify_derivatives(gaussian, [])


def test_verify_cumulants_gamma():
    cgf = GammaCgf(3.0, dim_p=2)
    report = verify_cumulants(cgf, [np.zeros(2), np.array([0.5, -2.0])])
    assert report.passed
    with pytest.raises(ValueError):
        verify_cumulants(cgf, [np.array([1.5, 0.0])])


def test_models_are_frozen():
    model = StirlingModel(10)
    with pytest.raises(TypeError):
        model.sample_n = 11


def test_has_analytic():
    assert StirlingModel(3).has_analytic("third_slice")
    wrapped = FunctionTarget(1, 1, lambda t: -t @ t)
    assert wrapped.has_analytic("eval")
    assert not wrapped.has_analytic("hess")


def _quartic(t):
    return -0.5 * t @ t - np.sum(t**4) / 12.0


def _quartic_grad(t):
    return -t - t**3 / 3.0


def _quartic_hess(t):
    return -np.eye(t.shape[0]) - np.diag(t**2)


def test_function_target_hessian_fallback():
    model = FunctionTarget(2, 1, _quartic, grad=_quartic_grad)
    theta = np.array([0.4, -0.7])
    np.testing.assert_allclose(model.hess(theta), _quartic_hess(theta), atol=1e-6)


def test_function_target_slice_fallbacks():
    model = FunctionTarget(2, 1, _quartic, grad=_quartic_grad, hess=_quartic_hess)
    theta = np.array([0.4, -0.7])
    np.testing.assert_allclose(
        model.third_slice(theta, 0), np.diag([-2.0 * theta[0], 0.0]), atol=1e-6
    )
    np.testing.assert_allclose(model.fourth_slice(theta, 1, 1), np.diag([0.0, -2.0]), atol=1e-5)
    np.testing.assert_allclose(model.fourth_slice(theta, 0, 1), np.zeros((2, 2)), atol=1e-5)
