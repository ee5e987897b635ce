import logging
from typing import Optional

import numpy as np
import scipy.stats as stats

import hdapprox.typing
from hdapprox.error import OutOfSupport
from hdapprox.model import CumulantModel
from hdapprox.models.glm import ExponentialFamily, GlmModel
from hdapprox.utils.seed_utils import as_rng

logger = logging.getLogger(__name__)


def exp_means_design(g: int) -> hdapprox.typing.DesignType:
    """
    Rows map (psi_1..psi_{g-1}, lambda) to the group rates eta_j = lambda + sum_{k<j} psi_k.
    """
    X = np.tril(np.ones((g, g)), k=-1)[:, : g - 1]
    return np.hstack([X, np.ones((g, 1))])


class ExponentialMeansModel(GlmModel, CumulantModel):
    def __init__(
        self,
        u: hdapprox.typing.VectorType,
        m: int,
        prior_sd: Optional[float] = None,
        null_rate: Optional[float] = None,
    ):
        """
        :param u:           the group sums u_j, one per group
        :param m:           observations per group
        :param prior_sd:    sd of a Gaussian prior on (psi, lambda), None for a flat prior
        :param null_rate:   common rate of the null CGF, the pooled estimate g m / sum(u) by default
        Equality of exponential means: g groups of m exponential observations with rates
        eta_j. As a log target it is the posterior in (psi_1..psi_{g-1}, lambda); as a CGF it
        is the joint CGF of the partial sums v_j = u_1 + ... + u_j under a common rate.
        """
        self.u = np.asarray(u, dtype=float)
        self.m = int(m)
        self.g = self.u.shape[0] if self.u.ndim == 1 else 0
        if self.g < 2 or self.m < 1 or np.any(self.u <= 0):
            raise ValueError("ExponentialMeansModel setting is not valid")
        self.null_rate = (
            self.g * self.m / float(np.sum(self.u)) if null_rate is None else float(null_rate)
        )
        if self.null_rate <= 0:
            raise ValueError("ExponentialMeansModel setting is not valid")
        super(ExponentialMeansModel, self).__init__(
            exp_means_design(self.g),
            self.u / self.m,
            ExponentialFamily(),
            prior_sd,
            np.full(self.g, float(self.m)),
        )

    def partial_sums(self) -> hdapprox.typing.VectorType:
        return np.cumsum(self.u)

    def canonical_start(self, psi, interest_index):
        beta = np.zeros(self.g)
        if interest_index is None:
            beta[-1] = 1.0
            return beta
        beta[interest_index] = psi
        if interest_index != self.g - 1:
            beta[-1] = 1.0 - float(np.min(self.X[:, :-1] @ beta[:-1]))
        return np.delete(beta, interest_index)

    def _tail_sums(self, t):
        # (L^T t)_j = t_j + ... + t_g
        return np.cumsum(np.asarray(t, dtype=float)[::-1])[::-1]

    def k_eval(self, t):
        a = self._tail_sums(t)
        return float(-self.m * np.sum(np.log1p(-a / self.null_rate)))

    def k_grad(self, t):
        a = self._tail_sums(t)
        return np.cumsum(self.m / (self.null_rate - a))

    def k_hess(self, t):
        a = self._tail_sums(t)
        L = np.tril(np.ones((self.g, self.g)))
        return (L * (self.m / (self.null_rate - a) ** 2)) @ L.T

    def in_domain(self, t):
        return bool(np.all(self._tail_sums(t) < self.null_rate))

    def __repr__(self):
        return f"ExponentialMeansModel(g={self.g}, m={self.m})"


def exp_means_exact_conditional(model: ExponentialMeansModel, u1: float, total: float) -> float:
    """
    Exact log density of u_1 given u_1 + u_2 = total for two groups under the null:
    total times a Beta(m, m) variable.
    """
    if model.g != 2:
        raise ValueError("the exact conditional is available for two groups only")
    if not 0 < u1 < total:
        raise OutOfSupport(f"u1 = {u1} outside (0, {total})")
    return float(stats.beta.logpdf(u1 / total, model.m, model.m) - np.log(total))


def simulate_exp_means(
    g: int,
    m: int,
    rates: Optional[hdapprox.typing.VectorType] = None,
    seed: int = 0,
    rng: Optional[np.random.Generator] = None,
    prior_sd: Optional[float] = None,
) -> ExponentialMeansModel:
    if g < 2 or m < 1:
        raise ValueError("simulate_exp_means needs g >= 2 and m >= 1")
    rng = as_rng(seed if rng is None else rng)
    rates = np.ones(g) if rates is None else np.asarray(rates, dtype=float)
    u = rng.gamma(m, 1.0 / rates)
    return ExponentialMeansModel(u, m, prior_sd)


def make_exp_means(n: int, p: int, rng: np.random.Generator, **params):
    """
    Grid builder: p groups sharing n observations, m = n // p per group.
    """
    if p < 2 or n < p:
        raise ValueError(f"exp-means needs p >= 2 groups and n >= p, got n={n}, p={p}")
    return simulate_exp_means(p, n // p, rng=rng, **params)
