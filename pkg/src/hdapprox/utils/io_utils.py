import json
from typing import Any, Dict, Mapping, Sequence, Tuple

import numpy as np
import pandas as pd

import hdapprox.typing


RUN_CSV_COLUMNS = (
    "n",
    "p",
    "replicate",
    "method",
    "log_approx",
    "log_oracle",
    "oracle_se",
    "rel_error",
    "runtime_ms",
    "error",
)
RUN_CSV_INT_COLUMNS = ("n", "p", "replicate")
FLOAT_FORMAT = "%.17g"

DATASET_RESPONSE_COLUMN = "y"
DATASET_COVARIATE_PREFIX = "x_"


def encode_run_csv(rows: Sequence[Mapping[str, Any]], path: str) -> None:
    """
    Write experiment cells as CSV: fixed header RUN_CSV_COLUMNS, one row per cell,
    floats with 17 significant digits, missing values as empty fields.
    """
    frame = pd.DataFrame([{c: row.get(c) for c in RUN_CSV_COLUMNS} for row in rows])
    frame = frame.reindex(columns=list(RUN_CSV_COLUMNS))
    for c in RUN_CSV_INT_COLUMNS:
        if len(frame):
            frame[c] = frame[c].astype(np.int64)
    _write_frame(frame, path)


def decode_run_csv(path: str) -> pd.DataFrame:
    return _read_frame(path)


def encode_dataset_csv(
    X: hdapprox.typing.DesignType, y: hdapprox.typing.ResponseType, path: str
) -> None:
    """
    Dataset layout: header x_1..x_p,y then one row per observation.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    columns = [f"{DATASET_COVARIATE_PREFIX}{k + 1}" for k in range(X.shape[1])]
    frame = pd.DataFrame(X, columns=columns)
    frame[DATASET_RESPONSE_COLUMN] = np.asarray(y, dtype=float)
    _write_frame(frame, path)


def decode_dataset_csv(
    path: str,
) -> Tuple[hdapprox.typing.DesignType, hdapprox.typing.ResponseType]:
    frame = _read_frame(path)
    covariates = [c for c in frame.columns if c.startswith(DATASET_COVARIATE_PREFIX)]
    if DATASET_RESPONSE_COLUMN not in frame.columns or not covariates:
        raise ValueError(f"{path} is not a dataset file (need x_1..x_p and y columns)")
    covariates.sort(key=lambda c: int(c[len(DATASET_COVARIATE_PREFIX) :]))
    return (
        frame[covariates].to_numpy(dtype=float),
        frame[DATASET_RESPONSE_COLUMN].to_numpy(dtype=float),
    )


def decode_json(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as source:
            return json.load(source)
    except OSError as err:
        raise OSError(f"cannot read {path}: {err.strerror or err}") from err


def encode_json(obj: Any, path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as sink:
            json.dump(obj, sink, indent=2, sort_keys=True, default=_json_default)
            sink.write("\n")
    except OSError as err:
        raise OSError(f"cannot write {path}: {err.strerror or err}") from err


def _json_default(obj: Any) -> Any:
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def _write_frame(frame: pd.DataFrame, path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as sink:
            frame.to_csv(sink, index=False, float_format=FLOAT_FORMAT)
    except OSError as err:
        raise OSError(f"cannot write {path}: {err.strerror or err}") from err


def _read_frame(path: str) -> pd.DataFrame:
    try:
        return pd.read_csv(path, encoding="utf-8", float_precision="round_trip")
    except OSError as err:
        raise OSError(f"cannot read {path}: {err.strerror or err}") from err
