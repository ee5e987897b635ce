from typing import Tuple

from hdapprox.model import (
    CumulantModel,
    FunctionCumulant,
    FunctionTarget,
    LogTargetModel,
    verify_cumulants,
    verify_derivatives,
)
from hdapprox.approx import (
    ApproxDensity,
    double_saddle_approx_density,
    double_saddle_log_conditional,
    find_mode,
    laplace_approx_density,
    laplace_log_normalizer,
    marginal_laplace_approx_density,
    marginal_laplace_log_density,
    renormalize_1d,
    saddlepoint_approx_density,
    saddlepoint_log_density,
    solve_saddle,
)
from hdapprox.models import make, register
from hdapprox.oracle import (
    closed_form_density,
    importance_log_normalizer,
    quadrature_log_normalizer,
)
from hdapprox.diagnostics import audit_assumptions, fit_scaling, rate_prediction

__version__ = "0.1.0"

__all__ = (
    "ApproxDensity",
    "CumulantModel",
    "FunctionCumulant",
    "FunctionTarget",
    "LogTargetModel",
    "audit_assumptions",
    "closed_form_density",
    "double_saddle_approx_density",
    "double_saddle_log_conditional",
    "find_mode",
    "fit_scaling",
    "importance_log_normalizer",
    "laplace_approx_density",
    "laplace_log_normalizer",
    "make",
    "marginal_laplace_approx_density",
    "marginal_laplace_log_density",
    "quadrature_log_normalizer",
    "rate_prediction",
    "register",
    "renormalize_1d",
    "saddlepoint_approx_density",
    "saddlepoint_log_density",
    "solve_saddle",
    "verify_cumulants",
    "verify_derivatives",
)


def __dir__() -> Tuple[str, ...]:
    return __all__
