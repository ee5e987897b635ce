import logging
from typing import Optional, Tuple

import numpy as np

import hdapprox.typing
from hdapprox.model import CumulantModel
from hdapprox.utils.seed_utils import as_rng

logger = logging.getLogger(__name__)

MIN_RATE = 0.1
MAX_REJECTION_FACTOR = 100


class ExponentialRegressionCgf(CumulantModel):
    def __init__(
        self,
        X: hdapprox.typing.DesignType,
        rates: hdapprox.typing.VectorType,
        y: Optional[hdapprox.typing.ResponseType] = None,
        rejections: int = 0,
    ):
        """
        :param X:           the n x p design
        :param rates:       the true rates x_j^T beta_0, all positive
        :param y:           the observed responses, optional
        :param rejections:  design rows redrawn by the simulator for violating positivity
        CGF of the sufficient statistic S = -X^T y of independent exponential responses,
        K(t) = -sum_j log(1 + x_j^T t / rate_j).
        """
        self.X = np.atleast_2d(np.asarray(X, dtype=float))
        self.rates = np.asarray(rates, dtype=float)
        self.y = None if y is None else np.asarray(y, dtype=float)
        self.rejections = int(rejections)
        self.sample_n, self.dim_p = self.X.shape
        if not self._is_valid():
            raise ValueError("ExponentialRegressionCgf setting is not valid")
        self._freeze()

    def _is_valid(self):
        if self.rates.shape != (self.sample_n,) or np.any(self.rates <= 0):
            return False
        if self.y is not None and (self.y.shape != (self.sample_n,) or np.any(self.y <= 0)):
            return False
        return self.rejections >= 0

    def _shifted_rates(self, t):
        return self.rates + self.X @ np.asarray(t, dtype=float)

    def k_eval(self, t):
        return float(-np.sum(np.log1p((self.X @ np.asarray(t, dtype=float)) / self.rates)))

    def k_grad(self, t):
        return -self.X.T @ (1.0 / self._shifted_rates(t))

    def k_hess(self, t):
        inv_sq = 1.0 / self._shifted_rates(t) ** 2
        return (self.X * inv_sq[:, None]).T @ self.X

    def in_domain(self, t):
        return bool(np.all(1.0 + (self.X @ np.asarray(t, dtype=float)) / self.rates > 0))

    def expected_statistic(self) -> hdapprox.typing.VectorType:
        return -self.X.T @ (1.0 / self.rates)

    def observed_statistic(self) -> hdapprox.typing.VectorType:
        if self.y is None:
            raise ValueError("no responses attached to this CGF")
        return -self.X.T @ self.y


def draw_positive_design(
    n: int,
    p: int,
    beta0: hdapprox.typing.VectorType,
    rng: np.random.Generator,
    min_rate: float = MIN_RATE,
    design_sd: float = 1.0,
) -> Tuple[hdapprox.typing.DesignType, int]:
    """
    Isotropic Gaussian design rows, each redrawn until x_j^T beta0 > min_rate.
    Return the design and the number of rejected rows.
    """
    X = np.empty((n, p))
    filled, rejections = 0, 0
    while filled < n:
        rows = design_sd * rng.standard_normal((n - filled, p))
        keep = rows[rows @ beta0 > min_rate]
        X[filled : filled + keep.shape[0]] = keep
        filled += keep.shape[0]
        rejections += rows.shape[0] - keep.shape[0]
        if rejections > MAX_REJECTION_FACTOR * n:
            raise ValueError(
                f"beta0 gives rates above {min_rate} too rarely ({rejections} rejections)"
            )
    return X, rejections


def simulate_exp_regression(
    n: int,
    p: int,
    beta0: Optional[hdapprox.typing.VectorType] = None,
    seed: int = 0,
    rng: Optional[np.random.Generator] = None,
    min_rate: float = MIN_RATE,
    design_sd: float = 1.0,
) -> ExponentialRegressionCgf:
    if n < 1 or p < 1:
        raise ValueError("simulate_exp_regression needs n, p >= 1")
    rng = as_rng(seed if rng is None else rng)
    beta0 = np.full(p, 1.0 / np.sqrt(p)) if beta0 is None else np.asarray(beta0, dtype=float)
    X, rejections = draw_positive_design(n, p, beta0, rng, min_rate, design_sd)
    rates = X @ beta0
    y = rng.exponential(1.0 / rates)
    logger.debug("exp regression n=%d p=%d: %d design rows rejected", n, p, rejections)
    return ExponentialRegressionCgf(X, rates, y, rejections)


def make_exp_regression(n: int, p: int, rng: np.random.Generator, **params):
    return simulate_exp_regression(n, p, rng=rng, **params)
