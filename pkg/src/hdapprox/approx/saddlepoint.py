import logging
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.integrate as integrate

import hdapprox.typing
from hdapprox.error import DomainEscape, Error, MaxIterations
from hdapprox.error import EndpointMassWarning
from hdapprox.model import CumulantModel
from hdapprox.utils.linalg_utils import chol_solve, jitchol, logdet, symmetrize

logger = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))
ENDPOINT_THRESHOLD = 1e-12
QUAD_EPSABS = 1e-12
QUAD_EPSREL = 1e-10


@dataclass(frozen=True)
class SaddleOptions:
    max_iter: int = 200
    tol_saddle: float = 1e-10
    max_halvings: int = 200


DEFAULT_OPTIONS = SaddleOptions()


@dataclass(frozen=True)
class SaddleResult:
    t_hat: hdapprox.typing.VectorType
    k_at_saddle: float
    k_hess_chol: hdapprox.typing.LowerFactorType
    log_det_k_hess: float
    residual_norm: float
    iterations: int = 0


@dataclass(frozen=True)
class DoubleSaddleResult:
    t_hat_full: hdapprox.typing.VectorType
    t_tilde_lambda: hdapprox.typing.VectorType
    log_det_full: float
    log_det_nuisance: float
    log_cond_density: float
    full_residual: float = 0.0
    nuisance_residual: float = 0.0


def solve_saddle(
    cgf: CumulantModel,
    s: hdapprox.typing.VectorType,
    init: Optional[hdapprox.typing.VectorType] = None,
    opts: SaddleOptions = DEFAULT_OPTIONS,
) -> SaddleResult:
    """
    Solve K'(t) = s by Newton's method. Each full step is halved until the iterate is inside
    the CGF domain and the residual norm decreases.

    :param cgf:     the cumulant generating function
    :param s:       the observed statistic, expected inside the range of K'
    :param init:    starting tilt, the origin when omitted
    :param opts:    solver options
    Raises DomainEscape when no halving lands in the domain (s outside the mean range) and
    MaxIterations when the iteration or halving budget runs out.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    t = np.zeros(cgf.dim_p) if init is None else np.array(init, dtype=float)
    if s.shape != (cgf.dim_p,) or t.shape != (cgf.dim_p,):
        raise ValueError(f"s and init must have shape ({cgf.dim_p},)")
    if not cgf.in_domain(t):
        raise DomainEscape(f"initial tilt {t} is outside the CGF domain")

    tol = opts.tol_saddle * (1.0 + float(np.linalg.norm(s)))
    r = cgf.k_grad(t) - s
    rnorm = float(np.linalg.norm(r))
    it = 0
    while rnorm > tol:
        if it == opts.max_iter:
            raise MaxIterations(
                f"saddle equation not solved in {opts.max_iter} iterations "
                f"(residual {rnorm:.3e}, tolerance {tol:.3e})"
            )
        factor, _ = jitchol(cgf.k_hess(t))
        direction = -chol_solve(factor, r)
        step = 1.0
        seen_in_domain = False
        for _ in range(opts.max_halvings):
            t_new = t + step * direction
            if cgf.in_domain(t_new):
                seen_in_domain = True
                r_new = cgf.k_grad(t_new) - s
                rnorm_new = float(np.linalg.norm(r_new))
                if rnorm_new < rnorm:
                    break
            step *= 0.5
        else:
            if not seen_in_domain:
                raise DomainEscape(
                    f"no step along the Newton direction stays in the CGF domain at "
                    f"iteration {it}; s = {s} is probably outside the range of K'"
                )
            raise MaxIterations(
                f"step halving did not reduce the residual {rnorm:.3e} at iteration {it}"
            )
        t, r, rnorm = t_new, r_new, rnorm_new
        it += 1
        logger.debug("saddle iter %d: residual %.3e step %.3e", it, rnorm, step)

    factor, _ = jitchol(cgf.k_hess(t))
    return SaddleResult(
        t_hat=t,
        k_at_saddle=cgf.k_eval(t),
        k_hess_chol=factor,
        log_det_k_hess=logdet(factor),
        residual_norm=rnorm,
        iterations=it,
    )


def saddlepoint_log_density(
    cgf: CumulantModel,
    s: hdapprox.typing.VectorType,
    init: Optional[hdapprox.typing.VectorType] = None,
    opts: SaddleOptions = DEFAULT_OPTIONS,
) -> float:
    s = np.atleast_1d(np.asarray(s, dtype=float))
    res = solve_saddle(cgf, s, init, opts)
    return (
        res.k_at_saddle
        - float(res.t_hat @ s)
        - 0.5 * cgf.dim_p * LOG_2PI
        - 0.5 * res.log_det_k_hess
    )


class _NuisanceSlice(CumulantModel):
    """
    The CGF restricted to the nuisance coordinates with the interest tilt pinned to zero.
    """

    def __init__(self, cgf: CumulantModel, interest_index: int):
        self.cgf = cgf
        self.interest_index = interest_index
        self.nuis = np.delete(np.arange(cgf.dim_p), interest_index)
        self.dim_p = cgf.dim_p - 1
        self.sample_n = cgf.sample_n
        self._freeze()

    def _embed(self, t):
        full = np.zeros(self.cgf.dim_p)
        full[self.nuis] = t
        return full

    def k_eval(self, t):
        return self.cgf.k_eval(self._embed(t))

    def k_grad(self, t):
        return self.cgf.k_grad(self._embed(t))[self.nuis]

    def k_hess(self, t):
        return symmetrize(self.cgf.k_hess(self._embed(t))[np.ix_(self.nuis, self.nuis)])

    def in_domain(self, t):
        return self.cgf.in_domain(self._embed(t))


def double_saddle_log_conditional(
    cgf: CumulantModel,
    s1: float,
    s2: hdapprox.typing.VectorType,
    interest_index: int = 0,
    opts: SaddleOptions = DEFAULT_OPTIONS,
) -> DoubleSaddleResult:
    """
    Double saddlepoint approximation of the conditional density of the interest component
    s1 given the remaining components s2: the full p-dimensional saddlepoint density divided
    by the (p-1)-dimensional one of the nuisance components, whose saddle is solved on the
    slice of K with the interest tilt set to zero.
    """
    if not 0 <= interest_index < cgf.dim_p:
        raise ValueError(f"interest index {interest_index} outside 0..{cgf.dim_p - 1}")
    s2 = np.atleast_1d(np.asarray(s2, dtype=float))
    if s2.shape != (cgf.dim_p - 1,):
        raise ValueError(f"s2 must have shape ({cgf.dim_p - 1},), got {s2.shape}")
    s = np.insert(s2, interest_index, float(s1))

    try:
        full = solve_saddle(cgf, s, opts=opts)
    except Error as e:
        raise type(e)(f"full saddle system: {e}") from e

    if cgf.dim_p == 1:
        t_tilde, k_tilde, logdet_nuis, nuis_residual = np.empty(0), 0.0, 0.0, 0.0
    else:
        try:
            nuis = solve_saddle(_NuisanceSlice(cgf, interest_index), s2, opts=opts)
        except Error as e:
            raise type(e)(f"nuisance saddle system: {e}") from e
        t_tilde, k_tilde = nuis.t_hat, nuis.k_at_saddle
        logdet_nuis, nuis_residual = nuis.log_det_k_hess, nuis.residual_norm

    log_cond = (
        0.5 * logdet_nuis
        - 0.5 * (LOG_2PI + full.log_det_k_hess)
        + full.k_at_saddle
        - k_tilde
        + float(t_tilde @ s2)
        - float(full.t_hat @ s)
    )
    return DoubleSaddleResult(
        t_hat_full=full.t_hat,
        t_tilde_lambda=t_tilde,
        log_det_full=full.log_det_k_hess,
        log_det_nuisance=logdet_nuis,
        log_cond_density=log_cond,
        full_residual=full.residual_norm,
        nuisance_residual=nuis_residual,
    )


def _safe_logdens(logdens: hdapprox.typing.LogDensityType) -> Callable[[float], float]:
    def wrapped(x):
        try:
            value = float(logdens(x))
        except Error:
            return -np.inf
        return value if not np.isnan(value) else -np.inf

    return wrapped


def renormalize_1d(
    logdens: hdapprox.typing.LogDensityType,
    bounds: hdapprox.typing.IntervalType,
    quad_points: int = 51,
) -> Tuple[hdapprox.typing.LogDensityType, float]:
    """
    Normalise a scalar log density numerically over finite bounds.

    :param logdens:     unnormalised log density; an Error raised at a point counts as zero density
    :param bounds:      finite integration interval
    :param quad_points: equally spaced probes used to locate the peak; interior probes are
                        passed to the adaptive rule as breakpoints
    Return the normalised log density and the log normalising constant.
    Warns EndpointMassWarning when the density at either bound exceeds 1e-12 of the peak.
    """
    lo, hi = float(bounds[0]), float(bounds[1])
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise ValueError(f"bounds {bounds} must be a finite interval")
    if quad_points < 3:
        raise ValueError("quad_points must be at least 3")

    safe = _safe_logdens(logdens)
    probes = np.linspace(lo, hi, quad_points)
    values = np.asarray([safe(x) for x in probes])
    shift = float(np.max(values))
    if not np.isfinite(shift):
        raise ValueError("log density is not finite at any probe point")

    for end, value in ((lo, values[0]), (hi, values[-1])):
        if value - shift > np.log(ENDPOINT_THRESHOLD):
            warnings.warn(
                f"density at bound {end} is {np.exp(value - shift):.3e} of its peak",
                EndpointMassWarning,
            )

    mass, _ = integrate.quad(
        lambda x: np.exp(safe(x) - shift),
        lo,
        hi,
        epsabs=QUAD_EPSABS,
        epsrel=QUAD_EPSREL,
        limit=max(200, 4 * quad_points),
        points=probes[1:-1],
    )
    log_const = shift + float(np.log(mass))
    logger.debug("renormalised on [%g, %g]: log constant %.12g", lo, hi, log_const)

    def normalized(x):
        return safe(x) - log_const

    return normalized, log_const


def log_mass_1d(
    logdens: hdapprox.typing.LogDensityType,
    bounds: hdapprox.typing.IntervalType,
    quad_points: int = 51,
) -> float:
    """
    Log of the total mass of exp(logdens) on bounds, without the endpoint check.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EndpointMassWarning)
        _, log_const = renormalize_1d(logdens, bounds, quad_points)
    return log_const
