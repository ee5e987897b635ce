from typing import Callable, Tuple
import numpy as np
import numpy.typing as npt


VectorType = npt.NDArray[np.float64]
MatrixType = npt.NDArray[np.float64]
LowerFactorType = npt.NDArray[np.float64]  # lower-triangular Cholesky factor
DesignType = npt.NDArray[np.float64]  # n x p, rows x_j
ResponseType = npt.NDArray[np.float64]
WeightsType = npt.NDArray[np.float64]

LogDensityType = Callable[[float], float]
IntervalType = Tuple[float, float]
