from typing import Tuple
from hdapprox.utils.io_utils import (
    decode_dataset_csv,
    decode_json,
    decode_run_csv,
    encode_dataset_csv,
    encode_json,
    encode_run_csv,
)
from hdapprox.utils.linalg_utils import chol_inverse, chol_solve, jitchol, logdet, symmetrize
from hdapprox.utils.seed_utils import as_rng, cell_rng, make_rng

__all__ = (
    "as_rng",
    "cell_rng",
    "chol_inverse",
    "chol_solve",
    "decode_dataset_csv",
    "decode_json",
    "decode_run_csv",
    "encode_dataset_csv",
    "encode_json",
    "encode_run_csv",
    "jitchol",
    "logdet",
    "make_rng",
    "symmetrize",
)


def __dir__() -> Tuple[str, ...]:
    return __all__
