import logging
from typing import Tuple

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as spla

import hdapprox.typing
from hdapprox.error import IndefiniteCurvature

logger = logging.getLogger(__name__)

JITTER_START = 1e-10
JITTER_GROWTH = 10.0
JITTER_MAX = 1e-2
DENSE_EIGEN_LIMIT = 200


def symmetrize(a: hdapprox.typing.MatrixType) -> hdapprox.typing.MatrixType:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    return 0.5 * (a + a.T)


def jitchol(
    a: hdapprox.typing.MatrixType,
    jitter_start: float = JITTER_START,
    jitter_growth: float = JITTER_GROWTH,
    jitter_max: float = JITTER_MAX,
) -> Tuple[hdapprox.typing.LowerFactorType, float]:
    """
    Lower Cholesky factor of a symmetric matrix, adding diagonal jitter (relative to the
    mean diagonal) when the plain factorisation fails.

    :param a:               symmetric matrix, expected positive definite
    :param jitter_start:    first relative jitter tried
    :param jitter_growth:   multiplicative growth of the jitter per retry
    :param jitter_max:      largest relative jitter tried before giving up
    Return the factor and the absolute jitter that was added (0 when none was needed).
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if not np.all(np.isfinite(a)):
        raise IndefiniteCurvature("matrix has non-finite entries")
    try:
        return la.cholesky(a, lower=True), 0.0
    except la.LinAlgError:
        pass

    scale = abs(float(np.mean(np.diag(a)))) or 1.0
    di = np.diag_indices(a.shape[0])
    jitter = jitter_start
    while jitter <= jitter_max * (1.0 + 1e-12):
        a_jit = a.copy()
        a_jit[di] += scale * jitter
        try:
            factor = la.cholesky(a_jit, lower=True)
            logger.debug("cholesky needed relative jitter %.1e", jitter)
            return factor, scale * jitter
        except la.LinAlgError:
            jitter *= jitter_growth

    raise IndefiniteCurvature(
        f"added maximum jitter {jitter_max:.1e} x mean diagonal and the matrix is still not positive definite"
    )


def logdet(factor: hdapprox.typing.LowerFactorType) -> float:
    """
    Log determinant of L L^T from its Cholesky factor L.
    """
    return 2.0 * float(np.sum(np.log(np.diag(factor))))


def chol_solve(
    factor: hdapprox.typing.LowerFactorType, b: np.ndarray
) -> np.ndarray:
    return la.cho_solve((factor, True), b)


def chol_inverse(factor: hdapprox.typing.LowerFactorType) -> hdapprox.typing.MatrixType:
    return chol_solve(factor, np.eye(factor.shape[0]))


def inv_sqrt_inf_norm(a: hdapprox.typing.MatrixType) -> float:
    """
    Max-row-sum norm of the symmetric inverse square root of a positive definite matrix.
    """
    w, v = la.eigh(symmetrize(a))
    if w[0] <= 0:
        raise IndefiniteCurvature(f"smallest eigenvalue {w[0]:.3e} is not positive")
    inv_sqrt = (v / np.sqrt(w)) @ v.T
    return float(np.max(np.sum(np.abs(inv_sqrt), axis=1)))


def extreme_eigenvalues(a: hdapprox.typing.MatrixType) -> Tuple[float, float]:
    """
    Smallest and largest eigenvalue of a symmetric matrix; Lanczos iteration above
    DENSE_EIGEN_LIMIT rows, a full decomposition below.
    """
    a = symmetrize(a)
    if a.shape[0] <= DENSE_EIGEN_LIMIT:
        w = la.eigvalsh(a)
        return float(w[0]), float(w[-1])
    lo = spla.eigsh(a, k=1, which="SA", return_eigenvectors=False)
    hi = spla.eigsh(a, k=1, which="LA", return_eigenvectors=False)
    return float(lo[0]), float(hi[0])


def max_abs_eigenvalue(a: hdapprox.typing.MatrixType) -> float:
    lo, hi = extreme_eigenvalues(a)
    return max(abs(lo), abs(hi))
