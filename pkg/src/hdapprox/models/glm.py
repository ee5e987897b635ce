import logging
from typing import Dict, Optional, Type, Union

import numpy as np
import scipy.special as special

import hdapprox.typing
from hdapprox.error import InverseMapDiverged
from hdapprox.model import CumulantModel, LogTargetModel
from hdapprox.models.exp_regression import draw_positive_design
from hdapprox.utils.linalg_utils import chol_solve, jitchol, symmetrize
from hdapprox.utils.seed_utils import as_rng

logger = logging.getLogger(__name__)

EVAL_CHUNK = 256
CANONICAL_CACHE_SIZE = 4096


class Family(object):
    """
    Canonical-link exponential family with unit dispersion: per observation the
    log-likelihood is T(y) eta - b(eta), with b the cumulant function.
    """

    name = ""

    def sufficient(self, y: np.ndarray) -> np.ndarray:
        return y

    def cumulant(self, eta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def mean(self, eta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def variance(self, eta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def d3(self, eta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def d4(self, eta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def in_domain(self, eta: np.ndarray) -> np.ndarray:
        return np.isfinite(eta)

    def valid_response(self, y: np.ndarray) -> bool:
        return True

    def __repr__(self):
        return f"{type(self).__name__}()"


class LogisticFamily(Family):
    name = "logistic"

    def cumulant(self, eta):
        return np.logaddexp(0.0, eta)

    def mean(self, eta):
        return special.expit(eta)

    def variance(self, eta):
        mu = special.expit(eta)
        return mu * (1.0 - mu)

    def d3(self, eta):
        mu = special.expit(eta)
        return mu * (1.0 - mu) * (1.0 - 2.0 * mu)

    def d4(self, eta):
        mu = special.expit(eta)
        w = mu * (1.0 - mu)
        return w * (1.0 - 6.0 * w)

    def valid_response(self, y):
        return bool(np.all((y == 0) | (y == 1)))


class PoissonFamily(Family):
    name = "poisson"

    def cumulant(self, eta):
        return np.exp(eta)

    mean = variance = d3 = d4 = cumulant

    def valid_response(self, y):
        return bool(np.all(y >= 0))


class ExponentialFamily(Family):
    """
    Exponential responses with canonical parameter the rate: T(y) = -y, b(eta) = -log(eta).
    """

    name = "exponential"

    def sufficient(self, y):
        return -y

    def cumulant(self, eta):
        return -np.log(eta)

    def mean(self, eta):
        return -1.0 / eta

    def variance(self, eta):
        return 1.0 / eta**2

    def d3(self, eta):
        return -2.0 / eta**3

    def d4(self, eta):
        return 6.0 / eta**4

    def in_domain(self, eta):
        return eta > 0

    def valid_response(self, y):
        return bool(np.all(y > 0))


FAMILIES: Dict[str, Type[Family]] = {
    "logistic": LogisticFamily,
    "poisson": PoissonFamily,
    "exponential": ExponentialFamily,
}


def get_family(family: Union[str, Family]) -> Family:
    if isinstance(family, Family):
        return family
    try:
        return FAMILIES[family]()
    except KeyError:
        raise ValueError(
            f"unknown family {family!r}; choose from {', '.join(sorted(FAMILIES))}"
        ) from None


class GlmModel(LogTargetModel):
    def __init__(
        self,
        X: hdapprox.typing.DesignType,
        y: hdapprox.typing.ResponseType,
        family: Union[str, Family] = "logistic",
        prior_sd: Optional[float] = 1.0,
        weights: Optional[hdapprox.typing.WeightsType] = None,
    ):
        """
        :param X:           the design, one row per observation
        :param y:           the responses
        :param family:      family tag or instance (logistic, poisson, exponential)
        :param prior_sd:    sd of the independent Gaussian prior on beta, None for a flat prior
        :param weights:     frequency weights, ones when omitted
        Log posterior of a canonical-link GLM with unit dispersion.
        """
        self.X = np.atleast_2d(np.asarray(X, dtype=float))
        self.y = np.asarray(y, dtype=float)
        self.family = get_family(family)
        self.prior_sd = None if prior_sd is None else float(prior_sd)
        self.weights = (
            np.ones(self.X.shape[0]) if weights is None else np.asarray(weights, dtype=float)
        )
        if not self._is_valid():
            raise ValueError("GlmModel setting is not valid")
        self.T = self.family.sufficient(self.y)
        self.dim_p = self.X.shape[1]
        self.sample_n = int(round(float(np.sum(self.weights))))
        self._freeze()

    def _is_valid(self):
        rows = self.X.shape[0]
        if self.y.shape != (rows,) or self.weights.shape != (rows,):
            return False
        if np.any(self.weights <= 0) or not np.all(np.isfinite(self.X)):
            return False
        if self.prior_sd is not None and self.prior_sd <= 0:
            return False
        return self.family.valid_response(self.y)

    def _prior_precision(self) -> float:
        return 0.0 if self.prior_sd is None else 1.0 / self.prior_sd**2

    def linear_predictor(self, theta):
        return self.X @ np.asarray(theta, dtype=float)

    def eval(self, theta):
        theta = np.asarray(theta, dtype=float)
        eta = self.X @ theta
        if not np.all(self.family.in_domain(eta)):
            return -np.inf
        loglik = np.sum(self.weights * (self.T * eta - self.family.cumulant(eta)))
        return float(loglik - 0.5 * self._prior_precision() * (theta @ theta))

    def eval_many(self, thetas):
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        out = np.empty(thetas.shape[0])
        for start in range(0, thetas.shape[0], EVAL_CHUNK):
            block = thetas[start : start + EVAL_CHUNK]
            eta = block @ self.X.T
            ok = np.all(self.family.in_domain(eta), axis=1)
            safe_eta = np.where(ok[:, None], eta, 1.0)
            loglik = np.sum(
                self.weights * (self.T * safe_eta - self.family.cumulant(safe_eta)), axis=1
            )
            prior = 0.5 * self._prior_precision() * np.sum(block**2, axis=1)
            out[start : start + EVAL_CHUNK] = np.where(ok, loglik - prior, -np.inf)
        return out

    def grad(self, theta):
        theta = np.asarray(theta, dtype=float)
        eta = self.X @ theta
        resid = self.weights * (self.T - self.family.mean(eta))
        return self.X.T @ resid - self._prior_precision() * theta

    def _weighted_gram(self, d: np.ndarray) -> np.ndarray:
        return (self.X * d[:, None]).T @ self.X

    def hess(self, theta):
        eta = self.X @ np.asarray(theta, dtype=float)
        h = -self._weighted_gram(self.weights * self.family.variance(eta))
        h[np.diag_indices_from(h)] -= self._prior_precision()
        return symmetrize(h)

    def third_slice(self, theta, l):
        eta = self.X @ np.asarray(theta, dtype=float)
        return symmetrize(-self._weighted_gram(self.weights * self.family.d3(eta) * self.X[:, l]))

    def fourth_slice(self, theta, l, m):
        eta = self.X @ np.asarray(theta, dtype=float)
        d = self.weights * self.family.d4(eta) * self.X[:, l] * self.X[:, m]
        return symmetrize(-self._weighted_gram(d))

    def sufficient_statistic(self) -> hdapprox.typing.VectorType:
        return self.X.T @ (self.weights * self.T)

    def sufficient_cgf(self, theta) -> "GlmSufficientCgf":
        return GlmSufficientCgf(self, theta)

    def canonical_start(self, psi: Optional[float], interest_index: Optional[int]):
        """
        Starting nuisance coordinates for the inverse mean map; must lie in the family domain.
        """
        return np.zeros(self.dim_p - (0 if interest_index is None else 1))

    def initial_point(self):
        return self.canonical_start(None, None)

    def __repr__(self):
        return f"{type(self).__name__}(family={self.family.name}, p={self.dim_p}, n={self.sample_n})"


class LogisticRegressionModel(GlmModel):
    def __init__(self, X, y, prior_sd: Optional[float] = 1.0):
        super(LogisticRegressionModel, self).__init__(X, y, "logistic", prior_sd)


class GlmSufficientCgf(CumulantModel):
    """
    CGF of the sufficient statistic X^T (w T) at parameter theta:
    K(t) = sum_j w_j [b(x_j^T (theta + t)) - b(x_j^T theta)]. Its saddlepoint at the observed
    statistic is the maximum-likelihood estimate minus theta.
    """

    def __init__(self, model: GlmModel, theta):
        self.model = model
        self.theta = np.asarray(theta, dtype=float)
        self.dim_p = model.dim_p
        self.sample_n = model.sample_n
        self._eta0 = model.X @ self.theta
        if not np.all(model.family.in_domain(self._eta0)):
            raise ValueError("GlmSufficientCgf setting is not valid")
        self._b0 = model.family.cumulant(self._eta0)
        self._freeze()

    def _eta(self, t):
        return self._eta0 + self.model.X @ np.asarray(t, dtype=float)

    def k_eval(self, t):
        eta = self._eta(t)
        return float(np.sum(self.model.weights * (self.model.family.cumulant(eta) - self._b0)))

    def k_grad(self, t):
        return self.model.X.T @ (self.model.weights * self.model.family.mean(self._eta(t)))

    def k_hess(self, t):
        d = self.model.weights * self.model.family.variance(self._eta(t))
        return symmetrize(self.model._weighted_gram(d))

    def in_domain(self, t):
        return bool(np.all(self.model.family.in_domain(self._eta(t))))


class MeanParametrizedGlm(LogTargetModel):
    """
    A GLM posterior in mixed coordinates: the interest coordinate stays canonical while every
    nuisance coordinate is replaced by its expected sufficient statistic divided by n,
    lambda = X_N^T (w b'(eta)) / n. The prior is an independent Gaussian (or flat) prior in
    the mixed coordinates. Derivatives follow by implicit differentiation of the mean map;
    at a constrained mode the interest/nuisance block of the Hessian vanishes.
    """

    def __init__(
        self,
        model: GlmModel,
        interest_index: Optional[int] = 0,
        prior_sd: Optional[float] = None,
        inverse_tol: float = 1e-11,
        inverse_max_iter: int = 100,
    ):
        self.model = model
        self.interest_index = None if interest_index is None else int(interest_index)
        self.prior_sd = None if prior_sd is None else float(prior_sd)
        self.inverse_tol = float(inverse_tol)
        self.inverse_max_iter = int(inverse_max_iter)
        self.dim_p = model.dim_p
        self.sample_n = model.sample_n
        if not self._is_valid():
            raise ValueError("MeanParametrizedGlm setting is not valid")
        if self.interest_index is None:
            self.interest = np.empty(0, dtype=int)
        else:
            self.interest = np.asarray([self.interest_index])
        self.nuisance = np.setdiff1d(np.arange(self.dim_p), self.interest)
        self._solved: Dict[bytes, hdapprox.typing.VectorType] = {}
        self._last_tau: Dict[bytes, hdapprox.typing.VectorType] = {}
        self._freeze()

    def _is_valid(self):
        if self.interest_index is not None and not 0 <= self.interest_index < self.dim_p:
            return False
        if self.prior_sd is not None and self.prior_sd <= 0:
            return False
        return self.inverse_tol > 0 and self.inverse_max_iter > 0

    def to_mean(self, beta) -> hdapprox.typing.VectorType:
        beta = np.asarray(beta, dtype=float)
        eta = self.model.X @ beta
        if not np.all(self.model.family.in_domain(eta)):
            raise ValueError("canonical point is outside the natural parameter space")
        mixed = beta.copy()
        XN = self.model.X[:, self.nuisance]
        mixed[self.nuisance] = XN.T @ (self.model.weights * self.model.family.mean(eta))
        mixed[self.nuisance] /= self.sample_n
        return mixed

    def to_canonical(self, theta) -> hdapprox.typing.VectorType:
        """
        Invert the mean map by Newton's method on the convex function
        sum_j w_j b(eta_j) - n lambda^T tau over the nuisance canonical coordinates tau.
        Newton starts from the last solution with the same interest value. Solutions are
        cached by point. Raises InverseMapDiverged on failure.
        """
        theta = np.asarray(theta, dtype=float)
        key = theta.tobytes()
        if key in self._solved:
            return self._solved[key].copy()
        beta = self._solve_canonical(theta)
        if len(self._solved) >= CANONICAL_CACHE_SIZE:
            self._solved.pop(next(iter(self._solved)))
        self._solved[key] = beta
        self._last_tau.clear()
        self._last_tau[theta[self.interest].tobytes()] = beta[self.nuisance]
        return beta.copy()

    def _solve_canonical(self, theta):
        X, w, fam, n = self.model.X, self.model.weights, self.model.family, self.sample_n
        XN = X[:, self.nuisance]
        lam = theta[self.nuisance]
        psi = theta[self.interest]
        offset = X[:, self.interest] @ psi
        target = n * lam

        def objective(tau):
            eta = offset + XN @ tau
            if not np.all(fam.in_domain(eta)):
                return np.inf
            return float(np.sum(w * fam.cumulant(eta)) - target @ tau)

        tau = self._last_tau.get(psi.tobytes())
        f = np.inf if tau is None else objective(tau)
        if not np.isfinite(f):
            tau = self.model.canonical_start(
                None if psi.size == 0 else float(psi[0]), self.interest_index
            )
            f = objective(tau)
        if not np.isfinite(f):
            raise InverseMapDiverged("starting point is outside the natural parameter space")
        tol = self.inverse_tol * (1.0 + float(np.linalg.norm(target)))
        for it in range(self.inverse_max_iter):
            eta = offset + XN @ tau
            resid = XN.T @ (w * fam.mean(eta)) - target
            if np.linalg.norm(resid) <= tol:
                beta = theta.copy()
                beta[self.nuisance] = tau
                return beta
            factor, _ = jitchol((XN * (w * fam.variance(eta))[:, None]).T @ XN)
            step = chol_solve(factor, resid)
            alpha = 1.0
            for _ in range(60):
                f_new = objective(tau - alpha * step)
                if f_new <= f + 10 * np.finfo(float).eps * (1.0 + abs(f)):
                    break
                alpha *= 0.5
            else:
                raise InverseMapDiverged(
                    f"line search failed at iteration {it} (residual {np.linalg.norm(resid):.3e})"
                )
            tau, f = tau - alpha * step, f_new
        raise InverseMapDiverged(
            f"no convergence in {self.inverse_max_iter} iterations for mean point {lam}"
        )

    def initial_point(self):
        return self.to_mean(self.model.initial_point())

    def _prior_precision(self) -> float:
        return 0.0 if self.prior_sd is None else 1.0 / self.prior_sd**2

    def eval(self, theta):
        theta = np.asarray(theta, dtype=float)
        try:
            beta = self.to_canonical(theta)
        except InverseMapDiverged:
            return -np.inf
        eta = self.model.X @ beta
        fam, w = self.model.family, self.model.weights
        loglik = np.sum(w * (self.model.T * eta - fam.cumulant(eta)))
        return float(loglik - 0.5 * self._prior_precision() * (theta @ theta))

    def _jacobian(self, beta):
        """
        D = d eta / d(mixed coordinates), the residual r = s_N - n lambda and z = X_N A^-1 r.
        """
        X, w, fam, n = self.model.X, self.model.weights, self.model.family, self.sample_n
        eta = X @ beta
        if self.nuisance.size == 0:
            return eta, X.copy(), np.zeros(X.shape[0])
        XN = X[:, self.nuisance]
        w2 = w * fam.variance(eta)
        factor, _ = jitchol((XN * w2[:, None]).T @ XN)
        D = np.empty((X.shape[0], self.dim_p))
        D[:, self.nuisance] = n * chol_solve(factor, XN.T).T
        for i in self.interest:
            c = XN.T @ (w2 * X[:, i])
            D[:, i] = X[:, i] - XN @ chol_solve(factor, c)
        resid = XN.T @ (w * (self.model.T - fam.mean(eta)))
        z = XN @ chol_solve(factor, resid)
        return eta, D, z

    def grad(self, theta):
        theta = np.asarray(theta, dtype=float)
        beta = self.to_canonical(theta)
        eta, D, _ = self._jacobian(beta)
        fam, w = self.model.family, self.model.weights
        return D.T @ (w * (self.model.T - fam.mean(eta))) - self._prior_precision() * theta

    def hess(self, theta):
        theta = np.asarray(theta, dtype=float)
        beta = self.to_canonical(theta)
        eta, D, z = self._jacobian(beta)
        fam, w = self.model.family, self.model.weights
        d = w * (fam.variance(eta) + fam.d3(eta) * z)
        h = -(D * d[:, None]).T @ D
        h[np.diag_indices_from(h)] -= self._prior_precision()
        return symmetrize(h)

    def __repr__(self):
        return f"MeanParametrizedGlm({self.model!r}, interest_index={self.interest_index})"


def mean_parametrization(
    model: GlmModel, theta_canonical, interest_index: Optional[int] = 0
) -> hdapprox.typing.VectorType:
    """
    Map a canonical point to mixed coordinates. The inverse is
    MeanParametrizedGlm(model, interest_index).to_canonical.
    """
    return MeanParametrizedGlm(model, interest_index).to_mean(theta_canonical)


def simulate_glm(
    n: int,
    p: int,
    family: str = "logistic",
    beta0: Optional[hdapprox.typing.VectorType] = None,
    seed: int = 0,
    rng: Optional[np.random.Generator] = None,
    prior_sd: Optional[float] = 1.0,
) -> GlmModel:
    """
    :param n:           the observation count
    :param p:           the dimension
    :param family:      logistic, poisson or exponential
    :param beta0:       data generating parameter; zeros (ones / sqrt(p) for exponential)
    :param seed:        seed used when no generator is given
    :param rng:         generator, overrides seed
    :param prior_sd:    prior sd of the returned model
    Standard normal design rows; exponential designs are redrawn until every rate is positive.
    """
    if n < 1 or p < 1:
        raise ValueError("simulate_glm needs n, p >= 1")
    fam = get_family(family)
    rng = as_rng(seed if rng is None else rng)
    if beta0 is None:
        beta0 = np.full(p, 1.0 / np.sqrt(p)) if fam.name == "exponential" else np.zeros(p)
    beta0 = np.asarray(beta0, dtype=float)
    if beta0.shape != (p,):
        raise ValueError(f"beta0 must have shape ({p},)")

    if fam.name == "exponential":
        X, _ = draw_positive_design(n, p, beta0, rng)
    else:
        X = rng.standard_normal((n, p))
    eta = X @ beta0
    if fam.name == "logistic":
        y = (rng.random(n) < special.expit(eta)).astype(float)
    elif fam.name == "poisson":
        y = rng.poisson(np.exp(eta)).astype(float)
    else:
        y = rng.exponential(1.0 / eta)
    return GlmModel(X, y, fam, prior_sd)


def simulate_logistic(
    n: int,
    p: int,
    beta0: Optional[hdapprox.typing.VectorType] = None,
    seed: int = 0,
    rng: Optional[np.random.Generator] = None,
    prior_sd: Optional[float] = 1.0,
) -> LogisticRegressionModel:
    glm = simulate_glm(n, p, "logistic", beta0, seed, rng, prior_sd)
    return LogisticRegressionModel(glm.X, glm.y, prior_sd)


def make_logistic(n: int, p: int, rng: np.random.Generator, **params):
    return simulate_logistic(n, p, rng=rng, **params)


def make_glm(n: int, p: int, rng: np.random.Generator, **params):
    return simulate_glm(n, p, rng=rng, **params)
