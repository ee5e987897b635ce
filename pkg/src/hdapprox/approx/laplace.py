import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

import hdapprox.typing
from hdapprox.error import MaxIterations, NonFiniteStart
from hdapprox.model import LogTargetModel
from hdapprox.utils.linalg_utils import (
    JITTER_GROWTH,
    JITTER_MAX,
    JITTER_START,
    chol_solve,
    jitchol,
    logdet,
    symmetrize,
)

logger = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))
ROUNDOFF = 10.0 * np.finfo(float).eps


@dataclass(frozen=True)
class SolverOptions:
    max_iter: int = 200
    tol_grad: float = 1e-10
    armijo: float = 1e-4
    shrink: float = 0.5
    max_halvings: int = 60
    jitter_start: float = JITTER_START
    jitter_growth: float = JITTER_GROWTH
    jitter_max: float = JITTER_MAX


DEFAULT_OPTIONS = SolverOptions()


@dataclass(frozen=True)
class ModeResult:
    theta_hat: hdapprox.typing.VectorType
    g_at_mode: float
    neg_hess_chol: hdapprox.typing.LowerFactorType
    log_det_neg_hess: float
    grad_norm: float
    iterations: int
    jitter: float = 0.0

    @property
    def dim_p(self) -> int:
        return int(self.theta_hat.shape[0])


@dataclass(frozen=True)
class ConstrainedModeResult:
    psi: float
    lambda_hat_psi: hdapprox.typing.VectorType
    theta_hat_psi: hdapprox.typing.VectorType
    log_det_neg_hess_lambda: float
    g_at_constrained: float
    grad_norm: float
    iterations: int
    interest_index: int = 0


def _newton_ascent(
    func: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    hess: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    opts: SolverOptions,
) -> Tuple[np.ndarray, float, np.ndarray, float, float, int]:
    """
    Damped Newton ascent with Cholesky of the negative Hessian (jittered when needed) and
    Armijo backtracking. Returns (x, f, factor, jitter, grad_norm, iterations).
    """
    x = np.array(x0, dtype=float)
    f = func(x)
    if not np.isfinite(f):
        raise NonFiniteStart(f"log target is not finite at the initial point {x}")

    for it in range(opts.max_iter + 1):
        gr = grad(x)
        gnorm = float(np.linalg.norm(gr))
        factor, jitter = jitchol(
            -symmetrize(hess(x)), opts.jitter_start, opts.jitter_growth, opts.jitter_max
        )
        logger.debug("newton iter %d: g=%.12g |grad|=%.3e jitter=%.1e", it, f, gnorm, jitter)
        if gnorm <= opts.tol_grad * (1.0 + abs(f)):
            return x, f, factor, jitter, gnorm, it
        if it == opts.max_iter:
            break

        direction = chol_solve(factor, gr)
        slope = float(gr @ direction)
        allowance = ROUNDOFF * (1.0 + abs(f))
        step = 1.0
        for _ in range(opts.max_halvings):
            x_new = x + step * direction
            f_new = func(x_new)
            if np.isfinite(f_new) and f_new >= f + opts.armijo * step * slope - allowance:
                break
            step *= opts.shrink
        else:
            raise MaxIterations(
                f"line search failed after {opts.max_halvings} halvings at iteration {it} "
                f"(|grad| = {gnorm:.3e})"
            )
        x, f = x_new, f_new

    raise MaxIterations(
        f"no convergence in {opts.max_iter} iterations (|grad| = {gnorm:.3e}, "
        f"tolerance {opts.tol_grad * (1.0 + abs(f)):.3e})"
    )


def find_mode(
    model: LogTargetModel,
    init: Optional[hdapprox.typing.VectorType] = None,
    opts: SolverOptions = DEFAULT_OPTIONS,
) -> ModeResult:
    """
    Maximise the log target by damped Newton ascent.

    :param model:   the log target
    :param init:    starting point, model.initial_point() when omitted
    :param opts:    solver options
    Return the converged ModeResult. Raises MaxIterations when the gradient tolerance is not
    reached and IndefiniteCurvature when -hess cannot be factored even with the maximal jitter.
    """
    x0 = model.initial_point() if init is None else np.asarray(init, dtype=float)
    if x0.shape != (model.dim_p,):
        raise ValueError(f"init has shape {x0.shape}, expected ({model.dim_p},)")
    x, f, factor, jitter, gnorm, iterations = _newton_ascent(
        model.eval, model.grad, model.hess, x0, opts
    )
    logger.debug("mode of %r found in %d iterations", model, iterations)
    return ModeResult(
        theta_hat=x,
        g_at_mode=float(f),
        neg_hess_chol=factor,
        log_det_neg_hess=logdet(factor),
        grad_norm=gnorm,
        iterations=iterations,
        jitter=jitter,
    )


def laplace_log_normalizer(mode: ModeResult) -> float:
    """
    Laplace estimate of log of the integral of exp{g - g(mode)}.
    """
    return 0.5 * mode.dim_p * LOG_2PI - 0.5 * mode.log_det_neg_hess


def laplace_log_evidence(mode: ModeResult) -> float:
    return mode.g_at_mode + laplace_log_normalizer(mode)


def laplace_density(
    mode: ModeResult, model: LogTargetModel, theta: hdapprox.typing.VectorType
) -> float:
    return (
        0.5 * mode.log_det_neg_hess
        - 0.5 * mode.dim_p * LOG_2PI
        + model.eval(np.asarray(theta, dtype=float))
        - mode.g_at_mode
    )


def _nuisance_index(dim_p: int, interest_index: int) -> np.ndarray:
    if not 0 <= interest_index < dim_p:
        raise ValueError(f"interest index {interest_index} outside 0..{dim_p - 1}")
    return np.delete(np.arange(dim_p), interest_index)


def constrained_mode(
    model: LogTargetModel,
    interest_index: int,
    psi: float,
    init: Optional[hdapprox.typing.VectorType] = None,
    opts: SolverOptions = DEFAULT_OPTIONS,
) -> ConstrainedModeResult:
    """
    Maximise g over the nuisance coordinates with the interest coordinate pinned to psi.
    """
    nuis = _nuisance_index(model.dim_p, interest_index)
    psi = float(psi)

    def embed(lam):
        theta = np.empty(model.dim_p)
        theta[interest_index] = psi
        theta[nuis] = lam
        return theta

    if nuis.size == 0:
        theta = embed(np.empty(0))
        return ConstrainedModeResult(
            psi=psi,
            lambda_hat_psi=np.empty(0),
            theta_hat_psi=theta,
            log_det_neg_hess_lambda=0.0,
            g_at_constrained=model.eval(theta),
            grad_norm=0.0,
            iterations=0,
            interest_index=interest_index,
        )

    lam0 = np.zeros(nuis.size) if init is None else np.asarray(init, dtype=float)
    lam, f, factor, _, gnorm, iterations = _newton_ascent(
        lambda lam: model.eval(embed(lam)),
        lambda lam: model.grad(embed(lam))[nuis],
        lambda lam: model.hess(embed(lam))[np.ix_(nuis, nuis)],
        lam0,
        opts,
    )
    return ConstrainedModeResult(
        psi=psi,
        lambda_hat_psi=lam,
        theta_hat_psi=embed(lam),
        log_det_neg_hess_lambda=logdet(factor),
        g_at_constrained=float(f),
        grad_norm=gnorm,
        iterations=iterations,
        interest_index=interest_index,
    )


def marginal_laplace_log_density(
    model: LogTargetModel,
    interest_index: int,
    psi: float,
    mode: ModeResult,
    opts: SolverOptions = DEFAULT_OPTIONS,
) -> float:
    """
    Laplace approximation of the marginal log density of one coordinate: the ratio of a
    (p-1)-dimensional Laplace estimate at the constrained mode to the p-dimensional one at
    the joint mode. The constrained solve starts from the joint mode's nuisance block.
    """
    nuis = _nuisance_index(model.dim_p, interest_index)
    cm = constrained_mode(model, interest_index, psi, mode.theta_hat[nuis], opts)
    return (
        0.5 * mode.log_det_neg_hess
        - 0.5 * LOG_2PI
        - 0.5 * cm.log_det_neg_hess_lambda
        + cm.g_at_constrained
        - mode.g_at_mode
    )
