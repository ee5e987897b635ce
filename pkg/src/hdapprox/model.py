import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np
import scipy.linalg as la

import hdapprox.typing
from hdapprox.error import FiniteDifferenceError
from hdapprox.utils.linalg_utils import symmetrize

logger = logging.getLogger(__name__)

GRAD_TOL = 1e-5
HESS_TOL = 1e-4
FD_STEP_FIRST = np.cbrt(np.finfo(float).eps)  # central differences
FD_STEP_SECOND = np.finfo(float).eps ** 0.25  # second differences


class _Frozen(object):
    __isfrozen = False

    def __setattr__(self, key, value):
        if self.__isfrozen:
            raise TypeError(
                "Cannot modify attributes once instance %r is initialized" % self
            )
        object.__setattr__(self, key, value)

    def _freeze(self):
        self.__isfrozen = True


class LogTargetModel(_Frozen):
    """
    Evaluable log target g_n(theta) = log prior + log likelihood on R^p.

    Subclasses implement `eval` and, where they can, the analytic derivatives; every
    derivative not overridden falls back to central finite differences. Instances are
    immutable once constructed, so evaluation is re-entrant across threads.
    """

    dim_p: int = 0
    sample_n: int = 0

    def eval(self, theta: hdapprox.typing.VectorType) -> float:
        raise NotImplementedError

    def grad(self, theta: hdapprox.typing.VectorType) -> hdapprox.typing.VectorType:
        return fd_gradient(self, theta)

    def hess(self, theta: hdapprox.typing.VectorType) -> hdapprox.typing.MatrixType:
        return fd_hessian(self, theta)

    def third_slice(
        self, theta: hdapprox.typing.VectorType, l: int
    ) -> hdapprox.typing.MatrixType:
        return fd_third_slice(self, theta, l)

    def fourth_slice(
        self, theta: hdapprox.typing.VectorType, l: int, m: int
    ) -> hdapprox.typing.MatrixType:
        return fd_fourth_slice(self, theta, l, m)

    def eval_many(self, thetas: np.ndarray) -> hdapprox.typing.VectorType:
        return np.asarray([self.eval(t) for t in np.atleast_2d(thetas)], dtype=float)

    def initial_point(self) -> hdapprox.typing.VectorType:
        return np.zeros(self.dim_p)

    def has_analytic(self, name: str) -> bool:
        return getattr(type(self), name) is not getattr(LogTargetModel, name)

    def __repr__(self):
        return f"{type(self).__name__}(p={self.dim_p}, n={self.sample_n})"


class CumulantModel(_Frozen):
    """
    Cumulant generating function K on the real axis, with derivatives and a domain test.
    """

    dim_p: int = 0
    sample_n: int = 0

    def k_eval(self, t: hdapprox.typing.VectorType) -> float:
        raise NotImplementedError

    def k_grad(self, t: hdapprox.typing.VectorType) -> hdapprox.typing.VectorType:
        return _fd_gradient(self.k_eval, np.asarray(t, dtype=float), None)

    def k_hess(self, t: hdapprox.typing.VectorType) -> hdapprox.typing.MatrixType:
        return symmetrize(_fd_jacobian(self.k_grad, np.asarray(t, dtype=float), None))

    def in_domain(self, t: hdapprox.typing.VectorType) -> bool:
        return True

    def __repr__(self):
        return f"{type(self).__name__}(p={self.dim_p}, n={self.sample_n})"


class FunctionTarget(LogTargetModel):
    def __init__(
        self,
        dim_p: int,
        sample_n: int,
        eval: Callable[[np.ndarray], float],
        grad: Optional[Callable] = None,
        hess: Optional[Callable] = None,
        third_slice: Optional[Callable] = None,
        fourth_slice: Optional[Callable] = None,
    ):
        """
        :param dim_p:           the parameter dimension
        :param sample_n:        the observation count
        :param eval:            theta -> g(theta)
        :param grad:            theta -> gradient, finite differences when omitted
        :param hess:            theta -> Hessian, finite differences of grad when omitted
        :param third_slice:     (theta, l) -> g3[:, :, l]
        :param fourth_slice:    (theta, l, m) -> g4[:, :, l, m]
        Wrap plain callables as a log target.
        """
        self.dim_p = int(dim_p)
        self.sample_n = int(sample_n)
        self._eval = eval
        self._grad = grad
        self._hess = hess
        self._third = third_slice
        self._fourth = fourth_slice
        if self.dim_p < 1 or self.sample_n < 1:
            raise ValueError("FunctionTarget setting is not valid")
        self._freeze()

    def eval(self, theta):
        return float(self._eval(np.asarray(theta, dtype=float)))

    def grad(self, theta):
        if self._grad is None:
            return fd_gradient(self, theta)
        return np.asarray(self._grad(np.asarray(theta, dtype=float)), dtype=float)

    def hess(self, theta):
        if self._hess is None:
            return fd_hessian(self, theta)
        return symmetrize(self._hess(np.asarray(theta, dtype=float)))

    def third_slice(self, theta, l):
        if self._third is None:
            return fd_third_slice(self, theta, l)
        return symmetrize(self._third(np.asarray(theta, dtype=float), l))

    def fourth_slice(self, theta, l, m):
        if self._fourth is None:
            return fd_fourth_slice(self, theta, l, m)
        return symmetrize(self._fourth(np.asarray(theta, dtype=float), l, m))

    def has_analytic(self, name):
        supplied = {
            "eval": self._eval,
            "grad": self._grad,
            "hess": self._hess,
            "third_slice": self._third,
            "fourth_slice": self._fourth,
        }
        return supplied.get(name) is not None


class FunctionCumulant(CumulantModel):
    def __init__(
        self,
        dim_p: int,
        sample_n: int,
        k_eval: Callable[[np.ndarray], float],
        k_grad: Optional[Callable] = None,
        k_hess: Optional[Callable] = None,
        in_domain: Optional[Callable[[np.ndarray], bool]] = None,
    ):
        self.dim_p = int(dim_p)
        self.sample_n = int(sample_n)
        self._k_eval = k_eval
        self._k_grad = k_grad
        self._k_hess = k_hess
        self._in_domain = in_domain
        if self.dim_p < 1 or self.sample_n < 1:
            raise ValueError("FunctionCumulant setting is not valid")
        self._freeze()

    def k_eval(self, t):
        return float(self._k_eval(np.asarray(t, dtype=float)))

    def k_grad(self, t):
        if self._k_grad is None:
            return super(FunctionCumulant, self).k_grad(t)
        return np.asarray(self._k_grad(np.asarray(t, dtype=float)), dtype=float)

    def k_hess(self, t):
        if self._k_hess is None:
            return super(FunctionCumulant, self).k_hess(t)
        return symmetrize(self._k_hess(np.asarray(t, dtype=float)))

    def in_domain(self, t):
        if self._in_domain is None:
            return True
        return bool(self._in_domain(np.asarray(t, dtype=float)))


def _default_steps(x: np.ndarray, step: Optional[float], base: float) -> np.ndarray:
    if step is not None:
        return np.full(x.shape, float(step))
    return base * (1.0 + np.abs(x))


def _fd_gradient(
    func: Callable[[np.ndarray], float], x: np.ndarray, step: Optional[float]
) -> np.ndarray:
    steps = _default_steps(x, step, FD_STEP_FIRST)
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = steps[i]
        hi, lo = func(x + e), func(x - e)
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise FiniteDifferenceError(
                f"non-finite value probing coordinate {i} (step {steps[i]:.3e})",
                coordinate=i,
            )
        out[i] = (hi - lo) / (2.0 * steps[i])
    return out


def _fd_jacobian(
    func: Callable[[np.ndarray], np.ndarray], x: np.ndarray, step: Optional[float]
) -> np.ndarray:
    steps = _default_steps(x, step, FD_STEP_FIRST)
    columns = []
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = steps[i]
        hi, lo = np.asarray(func(x + e)), np.asarray(func(x - e))
        if not (np.all(np.isfinite(hi)) and np.all(np.isfinite(lo))):
            raise FiniteDifferenceError(
                f"non-finite value probing coordinate {i} (step {steps[i]:.3e})",
                coordinate=i,
            )
        columns.append((hi - lo) / (2.0 * steps[i]))
    return np.stack(columns, axis=-1)


def fd_gradient(
    model: LogTargetModel,
    theta: hdapprox.typing.VectorType,
    step: Optional[float] = None,
) -> hdapprox.typing.VectorType:
    """
    Central-difference gradient of model.eval. The default step per coordinate is the
    cube root of machine epsilon scaled by (1 + |theta_i|); an explicit step is used as is.
    """
    return _fd_gradient(model.eval, np.asarray(theta, dtype=float), step)


def fd_hessian(
    model: LogTargetModel,
    theta: hdapprox.typing.VectorType,
    step: Optional[float] = None,
) -> hdapprox.typing.MatrixType:
    return symmetrize(_fd_jacobian(model.grad, np.asarray(theta, dtype=float), step))


def fd_third_slice(
    model: LogTargetModel, theta: hdapprox.typing.VectorType, l: int
) -> hdapprox.typing.MatrixType:
    theta = np.asarray(theta, dtype=float)
    h = FD_STEP_FIRST * (1.0 + abs(theta[l]))
    e = np.zeros_like(theta)
    e[l] = h
    return symmetrize((model.hess(theta + e) - model.hess(theta - e)) / (2.0 * h))


def fd_fourth_slice(
    model: LogTargetModel, theta: hdapprox.typing.VectorType, l: int, m: int
) -> hdapprox.typing.MatrixType:
    theta = np.asarray(theta, dtype=float)
    if model.has_analytic("third_slice"):
        h = FD_STEP_FIRST * (1.0 + abs(theta[m]))
        e = np.zeros_like(theta)
        e[m] = h
        diff = model.third_slice(theta + e, l) - model.third_slice(theta - e, l)
        return symmetrize(diff / (2.0 * h))

    hl = FD_STEP_SECOND * (1.0 + abs(theta[l]))
    el = np.zeros_like(theta)
    el[l] = hl
    if l == m:
        second = model.hess(theta + el) - 2.0 * model.hess(theta) + model.hess(theta - el)
        return symmetrize(second / hl**2)
    hm = FD_STEP_SECOND * (1.0 + abs(theta[m]))
    em = np.zeros_like(theta)
    em[m] = hm
    mixed = (
        model.hess(theta + el + em)
        - model.hess(theta + el - em)
        - model.hess(theta - el + em)
        + model.hess(theta - el - em)
    )
    return symmetrize(mixed / (4.0 * hl * hm))


def _relative_discrepancy(analytic: np.ndarray, reference: np.ndarray) -> float:
    scale = max(1.0, float(np.max(np.abs(reference))))
    return float(np.max(np.abs(np.asarray(analytic) - reference))) / scale


@dataclass(frozen=True)
class DerivativeReport:
    grad_discrepancy: List[float]
    hess_discrepancy: List[float]
    grad_tol: float = GRAD_TOL
    hess_tol: float = HESS_TOL

    @property
    def passed(self) -> bool:
        return all(d < self.grad_tol for d in self.grad_discrepancy) and all(
            d < self.hess_tol for d in self.hess_discrepancy
        )

    @property
    def max_grad_discrepancy(self) -> float:
        return max(self.grad_discrepancy)

    @property
    def max_hess_discrepancy(self) -> float:
        return max(self.hess_discrepancy)


def verify_derivatives(
    model: LogTargetModel,
    theta_samples: Sequence[hdapprox.typing.VectorType],
    grad_tol: float = GRAD_TOL,
    hess_tol: float = HESS_TOL,
) -> DerivativeReport:
    """
    Compare the model's gradient with finite differences of eval and its Hessian with
    finite differences of grad. Discrepancies are max-abs errors relative to
    max(1, max-abs of the finite-difference value). Report only, never raises on mismatch.
    """
    if len(theta_samples) < 1:
        raise ValueError("verify_derivatives needs at least one sample point")
    grad_d, hess_d = [], []
    for theta in theta_samples:
        theta = np.asarray(theta, dtype=float)
        grad_d.append(_relative_discrepancy(model.grad(theta), fd_gradient(model, theta)))
        hess_d.append(_relative_discrepancy(model.hess(theta), fd_hessian(model, theta)))
    report = DerivativeReport(grad_d, hess_d, grad_tol, hess_tol)
    if not report.passed:
        logger.info(
            "derivative check failed for %r: grad %.3e, hess %.3e",
            model,
            report.max_grad_discrepancy,
            report.max_hess_discrepancy,
        )
    return report


@dataclass(frozen=True)
class CumulantReport:
    grad_discrepancy: List[float]
    cholesky_ok: List[bool]
    grad_tol: float = GRAD_TOL

    @property
    def passed(self) -> bool:
        return all(d < self.grad_tol for d in self.grad_discrepancy) and all(
            self.cholesky_ok
        )


def verify_cumulants(
    cgf: CumulantModel,
    t_samples: Sequence[hdapprox.typing.VectorType],
    grad_tol: float = GRAD_TOL,
) -> CumulantReport:
    """
    Check k_grad against finite differences of k_eval and that k_hess admits a Cholesky
    factorisation at each in-domain sample.
    """
    if len(t_samples) < 1:
        raise ValueError("verify_cumulants needs at least one sample point")
    grad_d, chol_ok = [], []
    for t in t_samples:
        t = np.asarray(t, dtype=float)
        if not cgf.in_domain(t):
            raise ValueError(f"sample {t} is outside the CGF domain")
        grad_d.append(
            _relative_discrepancy(cgf.k_grad(t), _fd_gradient(cgf.k_eval, t, None))
        )
        try:
            la.cholesky(symmetrize(cgf.k_hess(t)), lower=True)
            chol_ok.append(True)
        except la.LinAlgError:
            chol_ok.append(False)
    return CumulantReport(grad_d, chol_ok, grad_tol)
