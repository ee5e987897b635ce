import logging
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as la
import scipy.special as special
import scipy.stats as stats

import hdapprox.typing
from hdapprox.error import ConfigError, OutOfSupport
from hdapprox.model import CumulantModel, LogTargetModel
from hdapprox.utils.linalg_utils import chol_inverse, jitchol, logdet, symmetrize
from hdapprox.utils.seed_utils import as_rng

logger = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))


class QuadraticTarget(LogTargetModel):
    def __init__(
        self,
        precision: hdapprox.typing.MatrixType,
        center: hdapprox.typing.VectorType,
        sample_n: int = 1,
        offset: float = 0.0,
    ):
        """
        :param precision:   positive definite curvature A = -g''
        :param center:      the maximiser
        :param sample_n:    the observation count reported to the engines
        :param offset:      value at the maximiser
        g(theta) = offset - (theta - center)^T A (theta - center) / 2.
        """
        self.precision = symmetrize(precision)
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.dim_p = self.center.shape[0]
        self.sample_n = int(sample_n)
        self.offset = float(offset)
        if not self._is_valid():
            raise ValueError("QuadraticTarget setting is not valid")
        self._chol, _ = jitchol(self.precision, jitter_max=0.0)
        self._freeze()

    def _is_valid(self):
        return self.precision.shape == (self.dim_p, self.dim_p) and self.sample_n >= 1

    @classmethod
    def isotropic(cls, n: int, p: int, a: Optional[Sequence[float]] = None):
        """
        g(theta) = -(n/2) theta^T theta + a^T theta.
        """
        a = np.zeros(p) if a is None else np.asarray(a, dtype=float)
        center = a / n
        return cls(n * np.eye(p), center, n, 0.5 * n * float(center @ center))

    def eval(self, theta):
        d = np.asarray(theta, dtype=float) - self.center
        return float(self.offset - 0.5 * d @ self.precision @ d)

    def eval_many(self, thetas):
        d = np.atleast_2d(np.asarray(thetas, dtype=float)) - self.center
        return self.offset - 0.5 * np.einsum("ij,jk,ik->i", d, self.precision, d)

    def grad(self, theta):
        return -self.precision @ (np.asarray(theta, dtype=float) - self.center)

    def hess(self, theta):
        return -self.precision.copy()

    def third_slice(self, theta, l):
        return np.zeros((self.dim_p, self.dim_p))

    def fourth_slice(self, theta, l, m):
        return np.zeros((self.dim_p, self.dim_p))

    def exact_log_normalizer(self) -> float:
        """
        log of the integral of exp{g - max g}.
        """
        return 0.5 * self.dim_p * LOG_2PI - 0.5 * logdet(self._chol)

    def exact_log_density(self, theta) -> float:
        return self.eval(theta) - self.offset - self.exact_log_normalizer()

    def exact_marginal_log_density(self, index: int, psi: float) -> float:
        var = chol_inverse(self._chol)[index, index]
        return float(stats.norm.logpdf(psi, self.center[index], np.sqrt(var)))

    def __repr__(self):
        return f"QuadraticTarget(p={self.dim_p}, n={self.sample_n})"


class GaussianRegressionModel(QuadraticTarget):
    def __init__(
        self,
        X: hdapprox.typing.DesignType,
        y: hdapprox.typing.ResponseType,
        noise_sd: float = 1.0,
        prior_sd: float = 1.0,
    ):
        """
        Linear regression with known noise and an independent Gaussian prior; the log
        posterior is exactly quadratic. eval and grad are computed from the data.
        """
        self.X = np.atleast_2d(np.asarray(X, dtype=float))
        self.y = np.asarray(y, dtype=float)
        self.noise_sd = float(noise_sd)
        self.prior_sd = float(prior_sd)
        if self.y.shape != (self.X.shape[0],) or self.noise_sd <= 0 or self.prior_sd <= 0:
            raise ValueError("GaussianRegressionModel setting is not valid")
        p = self.X.shape[1]
        precision = self.X.T @ self.X / self.noise_sd**2 + np.eye(p) / self.prior_sd**2
        center = np.linalg.solve(precision, self.X.T @ self.y / self.noise_sd**2)
        super(GaussianRegressionModel, self).__init__(
            precision, center, self.X.shape[0], self._data_eval(center)
        )

    def _data_eval(self, beta):
        resid = self.y - self.X @ beta
        return float(
            -0.5 * (resid @ resid) / self.noise_sd**2 - 0.5 * (beta @ beta) / self.prior_sd**2
        )

    def eval(self, theta):
        return self._data_eval(np.asarray(theta, dtype=float))

    def grad(self, theta):
        beta = np.asarray(theta, dtype=float)
        return self.X.T @ (self.y - self.X @ beta) / self.noise_sd**2 - beta / self.prior_sd**2

    def __repr__(self):
        return f"GaussianRegressionModel(p={self.dim_p}, n={self.sample_n})"


def simulate_gaussian(
    n: int,
    p: int,
    beta0: Optional[hdapprox.typing.VectorType] = None,
    seed: int = 0,
    rng: Optional[np.random.Generator] = None,
    noise_sd: float = 1.0,
    prior_sd: float = 1.0,
) -> GaussianRegressionModel:
    if n < 1 or p < 1:
        raise ValueError("simulate_gaussian needs n, p >= 1")
    rng = as_rng(seed if rng is None else rng)
    beta0 = np.zeros(p) if beta0 is None else np.asarray(beta0, dtype=float)
    X = rng.standard_normal((n, p))
    y = X @ beta0 + noise_sd * rng.standard_normal(n)
    return GaussianRegressionModel(X, y, noise_sd, prior_sd)


class StirlingModel(LogTargetModel):
    """
    g(theta) = n (theta - e^theta), whose normaliser Gamma(n) n^-n e^n is known.
    """

    def __init__(self, n: int):
        self.dim_p = 1
        self.sample_n = int(n)
        if self.sample_n < 1:
            raise ValueError("StirlingModel setting is not valid")
        self._freeze()

    def eval(self, theta):
        t = float(np.asarray(theta, dtype=float).reshape(-1)[0])
        return self.sample_n * (t - np.exp(t))

    def grad(self, theta):
        t = np.asarray(theta, dtype=float).reshape(-1)
        return self.sample_n * (1.0 - np.exp(t))

    def hess(self, theta):
        t = float(np.asarray(theta, dtype=float).reshape(-1)[0])
        return np.array([[-self.sample_n * np.exp(t)]])

    def third_slice(self, theta, l):
        return self.hess(theta)

    def fourth_slice(self, theta, l, m):
        return self.hess(theta)

    def exact_log_normalizer(self) -> float:
        n = self.sample_n
        return float(special.gammaln(n) - n * np.log(n) + n)

    def exact_log_density(self, theta) -> float:
        return self.eval(theta) + self.sample_n - self.exact_log_normalizer()

    def __repr__(self):
        return f"StirlingModel(n={self.sample_n})"


def stirling_ratio(n: int) -> float:
    """
    Laplace estimate over the true normaliser, sqrt(2 pi) n^(n - 1/2) e^-n / Gamma(n).
    """
    return float(
        np.exp(0.5 * LOG_2PI + (n - 0.5) * np.log(n) - n - special.gammaln(n))
    )


class GammaCgf(CumulantModel):
    """
    p independent Gamma(shape, rate) components: K(t) = -shape sum_i log(1 - t_i / rate).
    """

    def __init__(self, shape: float, rate: float = 1.0, dim_p: int = 1):
        self.shape = float(shape)
        self.rate = float(rate)
        self.dim_p = int(dim_p)
        self.sample_n = max(1, int(round(self.shape)))
        if self.shape <= 0 or self.rate <= 0 or self.dim_p < 1:
            raise ValueError("GammaCgf setting is not valid")
        self._freeze()

    def k_eval(self, t):
        return float(-self.shape * np.sum(np.log1p(-np.asarray(t, dtype=float) / self.rate)))

    def k_grad(self, t):
        return self.shape / (self.rate - np.asarray(t, dtype=float))

    def k_hess(self, t):
        return np.diag(self.shape / (self.rate - np.asarray(t, dtype=float)) ** 2)

    def in_domain(self, t):
        return bool(np.all(np.asarray(t, dtype=float) < self.rate))

    def exact_log_density(self, s) -> float:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if np.any(s <= 0):
            raise OutOfSupport(f"gamma density needs s > 0, got {s}")
        return float(np.sum(stats.gamma.logpdf(s, self.shape, scale=1.0 / self.rate)))

    def __repr__(self):
        return f"GammaCgf(shape={self.shape:g}, rate={self.rate:g}, p={self.dim_p})"


class NormalCgf(CumulantModel):
    """
    K(t) = mean^T t + t^T cov t / 2.
    """

    def __init__(self, cov: hdapprox.typing.MatrixType, mean=None, sample_n: int = 1):
        self.cov = symmetrize(cov)
        self.dim_p = self.cov.shape[0]
        self.mean = np.zeros(self.dim_p) if mean is None else np.asarray(mean, dtype=float)
        self.sample_n = int(sample_n)
        if self.mean.shape != (self.dim_p,) or self.sample_n < 1:
            raise ValueError("NormalCgf setting is not valid")
        jitchol(self.cov, jitter_max=0.0)
        self._freeze()

    @classmethod
    def isotropic(cls, n: int, p: int):
        return cls(n * np.eye(p), None, n)

    def k_eval(self, t):
        t = np.asarray(t, dtype=float)
        return float(self.mean @ t + 0.5 * t @ self.cov @ t)

    def k_grad(self, t):
        return self.mean + self.cov @ np.asarray(t, dtype=float)

    def k_hess(self, t):
        return self.cov.copy()

    def exact_log_density(self, s) -> float:
        return float(stats.multivariate_normal.logpdf(s, self.mean, self.cov))

    def __repr__(self):
        return f"NormalCgf(p={self.dim_p}, n={self.sample_n})"


class InverseGaussianCgf(CumulantModel):
    """
    Inverse Gaussian with mean mu and shape lam:
    K(t) = (lam / mu) (1 - sqrt(1 - 2 mu^2 t / lam)), defined for t < lam / (2 mu^2).
    """

    def __init__(self, mu: float = 1.0, lam: float = 1.0):
        self.mu = float(mu)
        self.lam = float(lam)
        self.dim_p = 1
        self.sample_n = 1
        if self.mu <= 0 or self.lam <= 0:
            raise ValueError("InverseGaussianCgf setting is not valid")
        self._freeze()

    def _root(self, t):
        return np.sqrt(1.0 - 2.0 * self.mu**2 * float(np.asarray(t).reshape(-1)[0]) / self.lam)

    def k_eval(self, t):
        return float(self.lam / self.mu * (1.0 - self._root(t)))

    def k_grad(self, t):
        return np.array([self.mu / self._root(t)])

    def k_hess(self, t):
        return np.array([[self.mu**3 / (self.lam * self._root(t) ** 3)]])

    def in_domain(self, t):
        return bool(float(np.asarray(t).reshape(-1)[0]) < self.lam / (2.0 * self.mu**2))

    def exact_log_density(self, s) -> float:
        s = float(np.asarray(s).reshape(-1)[0])
        if s <= 0:
            raise OutOfSupport(f"inverse Gaussian density needs s > 0, got {s}")
        return float(stats.invgauss.logpdf(s, self.mu / self.lam, scale=self.lam))

    def __repr__(self):
        return f"InverseGaussianCgf(mu={self.mu:g}, lam={self.lam:g})"


class ProductCgf(CumulantModel):
    """
    Independent blocks: K(t) = sum_b K_b(t_b) with t split in block order.
    """

    def __init__(self, blocks: Sequence[CumulantModel]):
        self.blocks = tuple(blocks)
        if not self.blocks:
            raise ValueError("ProductCgf setting is not valid")
        self.dim_p = sum(b.dim_p for b in self.blocks)
        self.sample_n = max(b.sample_n for b in self.blocks)
        self._splits = np.cumsum([b.dim_p for b in self.blocks])[:-1]
        self._freeze()

    def _parts(self, t):
        return np.split(np.asarray(t, dtype=float), self._splits)

    def k_eval(self, t):
        return float(sum(b.k_eval(part) for b, part in zip(self.blocks, self._parts(t))))

    def k_grad(self, t):
        return np.concatenate([b.k_grad(part) for b, part in zip(self.blocks, self._parts(t))])

    def k_hess(self, t):
        return la.block_diag(*[b.k_hess(part) for b, part in zip(self.blocks, self._parts(t))])

    def in_domain(self, t):
        return all(b.in_domain(part) for b, part in zip(self.blocks, self._parts(t)))


class TranslatedCgf(CumulantModel):
    """
    CGF of X + a: K(t) + a^T t.
    """

    def __init__(self, cgf: CumulantModel, shift):
        self.cgf = cgf
        self.shift = np.atleast_1d(np.asarray(shift, dtype=float))
        self.dim_p = cgf.dim_p
        self.sample_n = cgf.sample_n
        if self.shift.shape != (self.dim_p,):
            raise ValueError("TranslatedCgf setting is not valid")
        self._freeze()

    def k_eval(self, t):
        return self.cgf.k_eval(t) + float(self.shift @ np.asarray(t, dtype=float))

    def k_grad(self, t):
        return self.cgf.k_grad(t) + self.shift

    def k_hess(self, t):
        return self.cgf.k_hess(t)

    def in_domain(self, t):
        return self.cgf.in_domain(t)


def _reject_unknown(tag: str, params) -> None:
    if params:
        raise ConfigError(f"unknown {tag} parameters {sorted(params)}")


def make_quadratic(n: int, p: int, rng: np.random.Generator, **params):
    a = params.pop("a", None)
    _reject_unknown("quadratic", params)
    return QuadraticTarget.isotropic(n, p, a)


def make_gaussian(n: int, p: int, rng: np.random.Generator, **params):
    known = {k: params.pop(k) for k in ("beta0", "noise_sd", "prior_sd") if k in params}
    _reject_unknown("gaussian", params)
    return simulate_gaussian(n, p, rng=rng, **known)


def make_stirling(n: int, p: int, rng: np.random.Generator, **params):
    if p != 1:
        raise ValueError("the Stirling model is one-dimensional")
    _reject_unknown("stirling", params)
    return StirlingModel(n)


def make_gamma_cgf(n: int, p: int, rng: np.random.Generator, **params):
    rate = params.pop("rate", 1.0)
    _reject_unknown("gamma-cgf", params)
    return GammaCgf(n, rate, p)


def make_normal_cgf(n: int, p: int, rng: np.random.Generator, **params):
    _reject_unknown("normal-cgf", params)
    return NormalCgf.isotropic(n, p)


def make_inverse_gaussian_cgf(n: int, p: int, rng: np.random.Generator, **params):
    """
    Sum of n inverse Gaussian(mu, lam) variables, itself inverse Gaussian(n mu, n^2 lam).
    """
    if p != 1:
        raise ValueError("the inverse Gaussian CGF is one-dimensional")
    mu, lam = float(params.pop("mu", 1.0)), float(params.pop("lam", 1.0))
    _reject_unknown("inverse-gaussian-cgf", params)
    return InverseGaussianCgf(n * mu, n * n * lam)
