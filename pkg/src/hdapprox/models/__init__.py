from typing import Tuple

from hdapprox.models.registry import make, register, registry, spec
from hdapprox.models.reference import (
    GammaCgf,
    GaussianRegressionModel,
    InverseGaussianCgf,
    NormalCgf,
    ProductCgf,
    QuadraticTarget,
    StirlingModel,
    TranslatedCgf,
    simulate_gaussian,
    stirling_ratio,
)
from hdapprox.models.glm import (
    GlmModel,
    GlmSufficientCgf,
    LogisticRegressionModel,
    MeanParametrizedGlm,
    get_family,
    mean_parametrization,
    simulate_glm,
    simulate_logistic,
)
from hdapprox.models.exp_regression import ExponentialRegressionCgf, simulate_exp_regression
from hdapprox.models.exp_means import (
    ExponentialMeansModel,
    exp_means_exact_conditional,
    simulate_exp_means,
)


__all__ = (
    "ExponentialMeansModel",
    "ExponentialRegressionCgf",
    "GammaCgf",
    "GaussianRegressionModel",
    "GlmModel",
    "GlmSufficientCgf",
    "InverseGaussianCgf",
    "LogisticRegressionModel",
    "MeanParametrizedGlm",
    "NormalCgf",
    "ProductCgf",
    "QuadraticTarget",
    "StirlingModel",
    "TranslatedCgf",
    "exp_means_exact_conditional",
    "get_family",
    "make",
    "mean_parametrization",
    "register",
    "registry",
    "simulate_exp_means",
    "simulate_exp_regression",
    "simulate_gaussian",
    "simulate_glm",
    "simulate_logistic",
    "spec",
    "stirling_ratio",
)


def __dir__() -> Tuple[str, ...]:
    return __all__


register(id="quadratic", entry_point="hdapprox.models.reference:make_quadratic")
register(id="gaussian", entry_point="hdapprox.models.reference:make_gaussian")
register(id="stirling", entry_point="hdapprox.models.reference:make_stirling")
register(id="logistic", entry_point="hdapprox.models.glm:make_logistic")
register(id="glm", entry_point="hdapprox.models.glm:make_glm")
register(id="exp-means", entry_point="hdapprox.models.exp_means:make_exp_means", kind="both")
register(
    id="exp-regression",
    entry_point="hdapprox.models.exp_regression:make_exp_regression",
    kind="cumulant",
)
register(id="gamma-cgf", entry_point="hdapprox.models.reference:make_gamma_cgf", kind="cumulant")
register(
    id="normal-cgf", entry_point="hdapprox.models.reference:make_normal_cgf", kind="cumulant"
)
register(
    id="inverse-gaussian-cgf",
    entry_point="hdapprox.models.reference:make_inverse_gaussian_cgf",
    kind="cumulant",
)
