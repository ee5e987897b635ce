import logging
import warnings
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np
import scipy.integrate as integrate
import scipy.linalg as la
import scipy.special as special
import scipy.stats as stats

import hdapprox.typing
from hdapprox.approx.laplace import ModeResult, constrained_mode
from hdapprox.error import (
    DegenerateWeights,
    DimensionTooLarge,
    OutOfSupport,
    ToleranceNotReached,
)
from hdapprox.model import LogTargetModel
from hdapprox.utils.linalg_utils import chol_inverse, jitchol, logdet
from hdapprox.utils.seed_utils import make_rng

logger = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))
MAX_QUADRATURE_DIM = 3
HALF_WIDTH_SDS = 12.0
QUAD_EPSREL = 1e-10
QUAD_EPSABS = 1e-13  # on the standardised scale, where the integral is of order one
MIN_DRAWS = 1000
MIN_ESS = 50.0
DRAW_CHUNK = 65536

QUADRATURE = "quadrature"
IMPORTANCE_SAMPLING = "importance-sampling"
CLOSED_FORM = "closed-form"


@dataclass(frozen=True)
class OracleEstimate:
    value: float
    std_error: float
    method: str
    cost: int = 0


class _Counter(object):
    def __init__(self):
        self.calls = 0


def _integrate_box(func, lows, highs, counter: _Counter) -> float:
    """
    Adaptive Gauss-Kronrod over a box, tensorised over axes. IntegrationWarning is an error.
    """

    def wrapped(*x):
        counter.calls += 1
        return func(np.asarray(x))

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            if len(lows) == 1:
                value, _ = integrate.quad(
                    wrapped,
                    lows[0],
                    highs[0],
                    epsabs=QUAD_EPSABS,
                    epsrel=QUAD_EPSREL,
                    limit=200,
                )
            else:
                value, _ = integrate.nquad(
                    wrapped,
                    list(zip(lows, highs)),
                    opts={"epsabs": QUAD_EPSABS, "epsrel": QUAD_EPSREL, "limit": 100},
                )
        except integrate.IntegrationWarning as e:
            raise ToleranceNotReached(f"quadrature did not reach {QUAD_EPSREL:g}: {e}") from e
    if not value > 0:
        raise ToleranceNotReached(f"quadrature returned non-positive mass {value}")
    return float(value)


def _standardised_log_integral(func, center, sds, half_width_sds, counter) -> float:
    """
    log of the integral of exp(func) over center +/- half_width_sds * sds, computed on the
    standardised scale z = (theta - center) / sds.
    """
    k = center.shape[0]
    value = _integrate_box(
        lambda z: np.exp(func(center + sds * z)),
        [-half_width_sds] * k,
        [half_width_sds] * k,
        counter,
    )
    return float(np.log(value) + np.sum(np.log(sds)))


def quadrature_log_normalizer(
    model: LogTargetModel, mode: ModeResult, half_width_sds: float = HALF_WIDTH_SDS
) -> OracleEstimate:
    """
    :param model:           the log target, at most three-dimensional
    :param mode:            its mode
    :param half_width_sds:  half width of the integration box in posterior standard deviations
    Log of the integral of exp{g - g(mode)} by adaptive tensor quadrature.
    """
    if model.dim_p > MAX_QUADRATURE_DIM:
        raise DimensionTooLarge(
            f"quadrature is limited to p <= {MAX_QUADRATURE_DIM}, got p = {model.dim_p}"
        )
    sds = np.sqrt(np.diag(chol_inverse(mode.neg_hess_chol)))
    counter = _Counter()
    value = _standardised_log_integral(
        lambda theta: model.eval(theta) - mode.g_at_mode,
        mode.theta_hat,
        sds,
        half_width_sds,
        counter,
    )
    logger.debug("quadrature normaliser %.12g with %d evaluations", value, counter.calls)
    return OracleEstimate(value, 0.0, QUADRATURE, counter.calls)


def quadrature_log_marginal(
    model: LogTargetModel,
    mode: ModeResult,
    interest_index: int,
    psi: float,
    half_width_sds: float = HALF_WIDTH_SDS,
) -> OracleEstimate:
    """
    Marginal log density of one coordinate at psi: the integral of exp{g - g(mode)} over the
    nuisance coordinates (box centred at the constrained mode) minus the joint log normaliser.
    """
    joint = quadrature_log_normalizer(model, mode, half_width_sds)
    if model.dim_p == 1:
        value = model.eval(np.array([psi])) - mode.g_at_mode - joint.value
        return OracleEstimate(float(value), 0.0, QUADRATURE, joint.cost + 1)

    nuis = np.delete(np.arange(model.dim_p), interest_index)
    cm = constrained_mode(model, interest_index, psi, mode.theta_hat[nuis])
    factor, _ = jitchol(-model.hess(cm.theta_hat_psi)[np.ix_(nuis, nuis)])
    sds = np.sqrt(np.diag(chol_inverse(factor)))

    def conditional(lam):
        theta = np.empty(model.dim_p)
        theta[interest_index] = psi
        theta[nuis] = lam
        return model.eval(theta) - mode.g_at_mode

    counter = _Counter()
    numerator = _standardised_log_integral(
        conditional, cm.lambda_hat_psi, sds, half_width_sds, counter
    )
    return OracleEstimate(
        numerator - joint.value, 0.0, QUADRATURE, joint.cost + counter.calls
    )


def importance_log_normalizer(
    model: LogTargetModel,
    mode: ModeResult,
    draws: int = 100000,
    scale: float = 1.2,
    seed: int = 0,
    rng: Optional[np.random.Generator] = None,
) -> OracleEstimate:
    """
    :param model:   the log target
    :param mode:    its mode
    :param draws:   proposal draws, at least 1000
    :param scale:   proposal covariance is scale^2 (-g''(mode))^-1
    :param seed:    seed of the proposal stream
    :param rng:     generator, overrides seed
    Importance-sampling estimate of log of the integral of exp{g - g(mode)} with a Gaussian
    proposal at the mode. The standard error is the delta-method error of the log of the
    weight mean. Raises DegenerateWeights when the effective sample size is below 50.
    """
    if draws < MIN_DRAWS:
        raise ValueError(f"importance sampling needs at least {MIN_DRAWS} draws, got {draws}")
    if scale <= 0:
        raise ValueError(f"proposal scale must be positive, got {scale}")
    rng = make_rng(seed) if rng is None else rng
    p = model.dim_p
    factor = mode.neg_hess_chol
    log_q_const = -0.5 * p * LOG_2PI - p * np.log(scale) + 0.5 * logdet(factor)

    log_w = np.empty(draws)
    for start in range(0, draws, DRAW_CHUNK):
        size = min(DRAW_CHUNK, draws - start)
        z = rng.standard_normal((size, p))
        offsets = scale * la.solve_triangular(factor.T, z.T, lower=False).T
        thetas = mode.theta_hat + offsets
        log_q = log_q_const - 0.5 * np.sum(z**2, axis=1)
        log_w[start : start + size] = model.eval_many(thetas) - mode.g_at_mode - log_q

    value = float(special.logsumexp(log_w) - np.log(draws))
    w = np.exp(log_w - np.max(log_w))
    ess = float(np.sum(w) ** 2 / np.sum(w**2))
    if ess < MIN_ESS:
        raise DegenerateWeights(
            f"effective sample size {ess:.1f} of {draws} draws is below {MIN_ESS:g}"
        )
    std_error = float(np.std(w, ddof=1) / (np.sqrt(draws) * np.mean(w)))
    logger.debug("importance sampling: value %.10g se %.3e ess %.0f", value, std_error, ess)
    return OracleEstimate(value, std_error, IMPORTANCE_SAMPLING, draws)


def closed_form_density(family: str, params: Dict[str, Any], s) -> float:
    """
    Exact log density.

    :param family:  gamma {n, rate}, normal {mean, var} or {mean, cov},
                    inverse-normal {mu, lam} or exp-means-conditional {m, total}
    :param params:  the family parameters
    :param s:       the point
    """
    if family == "gamma":
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if np.any(s <= 0):
            raise OutOfSupport(f"gamma density needs s > 0, got {s}")
        rate = float(params.get("rate", 1.0))
        return float(np.sum(stats.gamma.logpdf(s, float(params["n"]), scale=1.0 / rate)))
    if family == "normal":
        if "cov" in params:
            cov = np.atleast_2d(np.asarray(params["cov"], dtype=float))
            mean = params.get("mean", np.zeros(cov.shape[0]))
            return float(stats.multivariate_normal.logpdf(s, mean, cov))
        sd = np.sqrt(float(params["var"]))
        return float(stats.norm.logpdf(float(s), float(params.get("mean", 0.0)), sd))
    if family == "inverse-normal":
        s = float(np.asarray(s).reshape(-1)[0])
        if s <= 0:
            raise OutOfSupport(f"inverse normal density needs s > 0, got {s}")
        mu, lam = float(params["mu"]), float(params["lam"])
        return float(stats.invgauss.logpdf(s, mu / lam, scale=lam))
    if family == "exp-means-conditional":
        s, m, total = float(s), float(params["m"]), float(params["total"])
        if not 0 < s < total:
            raise OutOfSupport(f"u1 = {s} outside (0, {total})")
        return float(stats.beta.logpdf(s / total, m, m) - np.log(total))
    raise ValueError(f"no closed form for family {family!r}")


def closed_form_log_normalizer(model: LogTargetModel) -> OracleEstimate:
    exact = getattr(model, "exact_log_normalizer", None)
    if exact is None:
        raise ValueError(f"{model!r} has no closed-form normaliser")
    return OracleEstimate(float(exact()), 0.0, CLOSED_FORM, 0)
