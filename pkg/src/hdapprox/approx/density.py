from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional

import numpy as np

from hdapprox.approx import laplace, saddlepoint
from hdapprox.model import CumulantModel, LogTargetModel


@dataclass(frozen=True)
class ApproxDensity:
    """
    A log-density evaluator produced by one of the approximation engines.

    :param method:      laplace | marginal-laplace | saddlepoint | double-saddlepoint
    :param log_density: point -> approximate log density
    :param metadata:    engine inputs and a summary of the mode or saddle used
    """

    method: str
    log_density: Callable[[Any], float]
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __call__(self, x) -> float:
        return self.log_density(x)


def laplace_approx_density(
    model: LogTargetModel,
    mode: Optional[laplace.ModeResult] = None,
    opts: laplace.SolverOptions = laplace.DEFAULT_OPTIONS,
) -> ApproxDensity:
    mode = laplace.find_mode(model, opts=opts) if mode is None else mode
    return ApproxDensity(
        method="laplace",
        log_density=lambda theta: laplace.laplace_density(mode, model, theta),
        metadata={
            "model": repr(model),
            "theta_hat": mode.theta_hat.tolist(),
            "log_det_neg_hess": mode.log_det_neg_hess,
            "log_normalizer": laplace.laplace_log_normalizer(mode),
        },
    )


def marginal_laplace_approx_density(
    model: LogTargetModel,
    interest_index: int = 0,
    mode: Optional[laplace.ModeResult] = None,
    opts: laplace.SolverOptions = laplace.DEFAULT_OPTIONS,
) -> ApproxDensity:
    mode = laplace.find_mode(model, opts=opts) if mode is None else mode
    return ApproxDensity(
        method="marginal-laplace",
        log_density=lambda psi: laplace.marginal_laplace_log_density(
            model, interest_index, float(psi), mode, opts
        ),
        metadata={
            "model": repr(model),
            "interest_index": interest_index,
            "psi_hat": float(mode.theta_hat[interest_index]),
            "log_det_neg_hess": mode.log_det_neg_hess,
        },
    )


def saddlepoint_approx_density(
    cgf: CumulantModel,
    opts: saddlepoint.SaddleOptions = saddlepoint.DEFAULT_OPTIONS,
) -> ApproxDensity:
    return ApproxDensity(
        method="saddlepoint",
        log_density=lambda s: saddlepoint.saddlepoint_log_density(cgf, s, opts=opts),
        metadata={"cgf": repr(cgf)},
    )


def double_saddle_approx_density(
    cgf: CumulantModel,
    s2,
    interest_index: int = 0,
    opts: saddlepoint.SaddleOptions = saddlepoint.DEFAULT_OPTIONS,
) -> ApproxDensity:
    s2 = np.atleast_1d(np.asarray(s2, dtype=float))
    return ApproxDensity(
        method="double-saddlepoint",
        log_density=lambda s1: saddlepoint.double_saddle_log_conditional(
            cgf, float(s1), s2, interest_index, opts
        ).log_cond_density,
        metadata={"cgf": repr(cgf), "s2": s2.tolist(), "interest_index": interest_index},
    )
