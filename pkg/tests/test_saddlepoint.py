import warnings

import numpy as np
import pytest
import scipy.stats as stats

from hdapprox.approx import (
    constrained_mode,
    double_saddle_approx_density,
    double_saddle_log_conditional,
    find_mode,
    renormalize_1d,
    saddlepoint_log_density,
    solve_saddle,
)
from hdapprox.approx.density import saddlepoint_approx_density
from hdapprox.approx.saddlepoint import SaddleOptions, log_mass_1d
from hdapprox.error import DomainEscape, EndpointMassWarning, Error, MaxIterations
from hdapprox.model import verify_cumulants
from hdapprox.models import (
    ExponentialMeansModel,
    GammaCgf,
    GlmModel,
    InverseGaussianCgf,
    NormalCgf,
    ProductCgf,
    TranslatedCgf,
    simulate_exp_regression,
    simulate_glm,
    stirling_ratio,
)


rng = np.random.default_rng(99)


def _random_cov(p):
    a = rng.standard_normal((p, p))
    return a @ a.T + p * np.eye(p)


def test_saddle_at_mean():
    res = solve_saddle(GammaCgf(3.0), [3.0])
    assert res.t_hat[0] == 0.0
    assert res.iterations == 0


def test_gamma_saddle_closed_form():
    res = solve_saddle(GammaCgf(4.0), [8.0])
    assert res.t_hat[0] == pytest.approx(0.5, abs=1e-10)
    assert res.residual_norm <= 1e-10 * (1.0 + 8.0)


def test_normal_saddle_is_linear():
    s = np.array([1.5, -3.0])
    res = solve_saddle(NormalCgf.isotropic(3, 2), s)
    np.testing.assert_allclose(res.t_hat, s / 3.0, atol=1e-12)


def test_standard_normal_density():
    value = saddlepoint_log_density(NormalCgf.isotropic(1, 1), [0.0])
    assert value == pytest.approx(-0.5 * np.log(2 * np.pi), abs=1e-14)


def test_gamma_ratio_at_one():
    cgf = GammaCgf(1.0)
    ratio = np.exp(cgf.exact_log_density([1.0]) - saddlepoint_log_density(cgf, [1.0]))
    assert ratio == pytest.approx(np.sqrt(2 * np.pi) / np.e, rel=1e-10)
    assert ratio == pytest.approx(0.92214, abs=1e-5)


def test_gamma_ratio_constant():
    cgf = GammaCgf(2.0)
    ratios = [
        np.exp(cgf.exact_log_density([s]) - saddlepoint_log_density(cgf, [s]))
        for s in (1.0, 2.0, 4.0, 8.0)
    ]
    np.testing.assert_allclose(ratios, stirling_ratio(2), rtol=1e-10)
    assert ratios[0] == pytest.approx(0.95950, abs=1e-5)


def test_gamma_ratio_constant_on_grid():
    cgf = GammaCgf(5.0)
    ratios = np.asarray(
        [
            np.exp(cgf.exact_log_density([s]) - saddlepoint_log_density(cgf, [s]))
            for s in np.linspace(0.5, 20.0, 10)
        ]
    )
    assert np.std(ratios) / np.mean(ratios) < 1e-10


@pytest.mark.parametrize("p", [1, 3, 10])
def test_normal_exact(p):
    cgf = NormalCgf(_random_cov(p), rng.standard_normal(p))
    for s in rng.standard_normal((5, p)) * 2.0:
        assert saddlepoint_log_density(cgf, s) == pytest.approx(
            cgf.exact_log_density(s), abs=1e-10
        )


def test_product_and_translated_cgf():
    blocks = [GammaCgf(3.0), NormalCgf(_random_cov(2))]
    cgf = ProductCgf(blocks)
    s = np.array([2.0, 0.3, -0.4])
    expected = saddlepoint_log_density(blocks[0], s[:1]) + saddlepoint_log_density(
        blocks[1], s[1:]
    )
    assert saddlepoint_log_density(cgf, s) == pytest.approx(expected, abs=1e-10)
    shifted = TranslatedCgf(cgf, [1.0, 2.0, 3.0])
    assert saddlepoint_log_density(shifted, s + [1.0, 2.0, 3.0]) == pytest.approx(
        expected, abs=1e-10
    )


def test_domain_escape_from_invalid_start():
    with pytest.raises(DomainEscape):
        solve_saddle(GammaCgf(1.0), [1.0], init=[2.0])


def test_statistic_outside_range():
    with pytest.raises(Error):
        solve_saddle(GammaCgf(1.0), [-1.0])


def test_saddle_iteration_budget():
    with pytest.raises(MaxIterations):
        solve_saddle(GammaCgf(1.0), [50.0], opts=SaddleOptions(max_iter=2))


def test_saddle_shape_check():
    with pytest.raises(ValueError):
        solve_saddle(GammaCgf(1.0, dim_p=2), [1.0])


def test_renormalize_gaussian():
    _, log_const = renormalize_1d(lambda x: -0.5 * x * x, (-10.0, 10.0))
    assert log_const == pytest.approx(0.5 * np.log(2 * np.pi), abs=1e-10)


def test_renormalize_is_idempotent():
    normalized, _ = renormalize_1d(lambda x: stats.norm.logpdf(x, 1.0, 2.0), (-30.0, 30.0))
    _, log_const = renormalize_1d(normalized, (-30.0, 30.0))
    assert log_const == pytest.approx(0.0, abs=1e-10)


def test_renormalize_warns_on_endpoint_mass():
    with pytest.warns(EndpointMassWarning):
        renormalize_1d(lambda x: -0.5 * x * x, (-1.0, 1.0))
    with warnings.catch_warnings():
        warnings.simplefilter("error", EndpointMassWarning)
        log_mass_1d(lambda x: -0.5 * x * x, (-1.0, 1.0))


def test_renormalize_bounds():
    with pytest.raises(ValueError):
        renormalize_1d(lambda x: -x * x, (1.0, -1.0))
    with pytest.raises(ValueError):
        renormalize_1d(lambda x: -x * x, (0.0, np.inf))


def test_renormalized_gamma_is_exponential():
    cgf = GammaCgf(1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EndpointMassWarning)
        normalized, _ = renormalize_1d(lambda x: saddlepoint_log_density(cgf, x), (0.0, 60.0))
    for s in np.linspace(0.1, 10.0, 12):
        assert np.exp(normalized(s)) == pytest.approx(np.exp(-s), abs=1e-8)


def test_renormalized_gamma_exact():
    cgf = GammaCgf(3.0)
    normalized, log_const = renormalize_1d(
        lambda x: saddlepoint_log_density(cgf, x), (0.0, 80.0)
    )
    assert log_const == pytest.approx(-np.log(stirling_ratio(3)), abs=1e-8)
    for s in np.linspace(0.2, 15.0, 10):
        assert normalized(s) == pytest.approx(cgf.exact_log_density([s]), abs=1e-8)


def test_renormalized_inverse_gaussian_exact():
    cgf = InverseGaussianCgf(1.0, 2.0)
    normalized, log_const = renormalize_1d(
        lambda x: saddlepoint_log_density(cgf, x), (0.0, 40.0)
    )
    assert log_const == pytest.approx(0.0, abs=1e-8)
    for s in np.linspace(0.2, 5.0, 10):
        assert normalized(s) == pytest.approx(cgf.exact_log_density(s), abs=1e-8)


@pytest.mark.parametrize("m", [2, 5, 20])
def test_double_saddle_exact_for_exponential_means(m):
    model = ExponentialMeansModel(np.array([1.0, 1.4]) * m, m)
    total = float(np.sum(model.u))

    def logdens(u1):
        return double_saddle_log_conditional(model, u1, [total]).log_cond_density

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EndpointMassWarning)
        normalized, _ = renormalize_1d(logdens, (0.0, total))
    grid = np.linspace(0.0, total, 52)[1:-1]
    approx = np.exp([normalized(u1) for u1 in grid])
    exact = stats.beta.pdf(grid / total, m, m) / total
    assert np.max(np.abs(approx - exact)) < 1e-6


def test_double_saddle_three_groups():
    model = ExponentialMeansModel(np.array([4.0, 5.0, 6.0]), 5)
    v = model.partial_sums()
    res = double_saddle_log_conditional(model, v[0], v[1:])
    assert res.t_tilde_lambda.shape == (2,)
    assert res.full_residual <= 1e-10 * (1.0 + np.linalg.norm(v))
    assert np.isfinite(res.log_cond_density)


def test_double_saddle_factory_and_shape_check():
    cgf = NormalCgf(np.array([[2.0, 0.6], [0.6, 1.0]]))
    density = double_saddle_approx_density(cgf, [0.4])
    # conditional of a bivariate normal
    expected = stats.norm.logpdf(0.3, 0.6 * 0.4, np.sqrt(2.0 - 0.36))
    assert density(0.3) == pytest.approx(expected, abs=1e-10)
    with pytest.raises(ValueError):
        double_saddle_log_conditional(cgf, 0.3, [0.4, 0.1])


def test_saddlepoint_factory():
    cgf = NormalCgf.isotropic(2, 2)
    density = saddlepoint_approx_density(cgf)
    assert density.method == "saddlepoint"
    assert density([0.5, -0.5]) == pytest.approx(cgf.exact_log_density([0.5, -0.5]), abs=1e-12)


def test_exp_regression_cgf():
    cgf = simulate_exp_regression(60, 3, seed=4)
    assert verify_cumulants(cgf, [np.zeros(3)]).passed
    res = solve_saddle(cgf, cgf.expected_statistic())
    np.testing.assert_allclose(res.t_hat, np.zeros(3), atol=1e-12)
    res = solve_saddle(cgf, cgf.observed_statistic())
    assert res.residual_norm <= 1e-10 * (1.0 + np.linalg.norm(cgf.observed_statistic()))


def test_glm_sufficient_cgf_saddle_is_mle():
    base = simulate_glm(300, 2, "poisson", beta0=[0.3, -0.2], seed=6)
    model = GlmModel(base.X, base.y, "poisson", prior_sd=None)
    mle = find_mode(model).theta_hat
    theta = np.array([0.1, 0.1])
    res = solve_saddle(model.sufficient_cgf(theta), model.sufficient_statistic())
    np.testing.assert_allclose(res.t_hat, mle - theta, atol=1e-8)


def test_separable_saddlepoint_is_product():
    s = np.array([1.5, 3.0, 0.7])
    joint = saddlepoint_log_density(GammaCgf(2.0, 1.5, dim_p=3), s)
    separate = sum(saddlepoint_log_density(GammaCgf(2.0, 1.5), [x]) for x in s)
    assert joint == pytest.approx(separate, abs=1e-10)
    blocks = [InverseGaussianCgf(1.0, 2.0), GammaCgf(4.0), InverseGaussianCgf(0.5, 1.0)]
    joint = saddlepoint_log_density(ProductCgf(blocks), s)
    separate = sum(saddlepoint_log_density(b, [x]) for b, x in zip(blocks, s))
    assert joint == pytest.approx(separate, abs=1e-10)


def test_double_saddle_offsets_are_fitted_minus_base():
    base = simulate_glm(300, 3, "poisson", beta0=[0.3, -0.2, 0.1], seed=8)
    model = GlmModel(base.X, base.y, "poisson", prior_sd=None)
    mle = find_mode(model).theta_hat
    theta = np.array([0.1, 0.0, 0.2])
    s = model.sufficient_statistic()
    res = double_saddle_log_conditional(model.sufficient_cgf(theta), s[0], s[1:])
    np.testing.assert_allclose(res.t_hat_full, mle - theta, atol=1e-8)
    cm = constrained_mode(model, 0, theta[0], mle[1:])
    np.testing.assert_allclose(res.t_tilde_lambda, cm.lambda_hat_psi - theta[1:], atol=1e-8)


def test_mass_before_renormalization():
    cases = [
        (GammaCgf(1.0), (0.0, 60.0)),
        (GammaCgf(2.0), (0.0, 60.0)),
        (GammaCgf(5.0), (0.0, 80.0)),
        (InverseGaussianCgf(1.0, 2.0), (0.0, 40.0)),
    ]
    for cgf, bounds in cases:
        log_mass = log_mass_1d(lambda x, cgf=cgf: saddlepoint_log_density(cgf, x), bounds)
        assert 0.5 <= np.exp(log_mass) <= 2.0
    model = ExponentialMeansModel(np.array([3.0, 4.0]), 3)
    total = float(np.sum(model.u))
    log_mass = log_mass_1d(
        lambda u1: double_saddle_log_conditional(model, u1, [total]).log_cond_density,
        (0.0, total),
    )
    assert 0.5 <= np.exp(log_mass) <= 2.0
