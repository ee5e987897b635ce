from typing import Tuple

from hdapprox.approx.laplace import (
    ConstrainedModeResult,
    ModeResult,
    SolverOptions,
    constrained_mode,
    find_mode,
    laplace_density,
    laplace_log_evidence,
    laplace_log_normalizer,
    marginal_laplace_log_density,
)
from hdapprox.approx.saddlepoint import (
    DoubleSaddleResult,
    SaddleOptions,
    SaddleResult,
    double_saddle_log_conditional,
    renormalize_1d,
    saddlepoint_log_density,
    solve_saddle,
)
from hdapprox.approx.density import (
    ApproxDensity,
    double_saddle_approx_density,
    laplace_approx_density,
    marginal_laplace_approx_density,
    saddlepoint_approx_density,
)

__all__ = (
    "ApproxDensity",
    "ConstrainedModeResult",
    "DoubleSaddleResult",
    "ModeResult",
    "SaddleOptions",
    "SaddleResult",
    "SolverOptions",
    "constrained_mode",
    "double_saddle_approx_density",
    "double_saddle_log_conditional",
    "find_mode",
    "laplace_approx_density",
    "laplace_density",
    "laplace_log_evidence",
    "laplace_log_normalizer",
    "marginal_laplace_approx_density",
    "marginal_laplace_log_density",
    "renormalize_1d",
    "saddlepoint_approx_density",
    "saddlepoint_log_density",
    "solve_saddle",
)


def __dir__() -> Tuple[str, ...]:
    return __all__
