import argparse
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from hdapprox.approx.laplace import (
    find_mode,
    laplace_log_normalizer,
    marginal_laplace_log_density,
)
from hdapprox.approx.saddlepoint import (
    double_saddle_log_conditional,
    renormalize_1d,
    saddlepoint_log_density,
)
from hdapprox.diagnostics import (
    AssumptionReport,
    RatePrediction,
    ScalingFit,
    audit_assumptions,
    fit_scaling,
    predicted_rate,
    rate_prediction,
    RATE_SOURCES,
)
from hdapprox.error import ConfigError, Error, InsufficientSpread
from hdapprox.model import CumulantModel
from hdapprox.models.registry import make, registry, spec
from hdapprox.models.exp_means import ExponentialMeansModel
from hdapprox.models.glm import GlmModel, MeanParametrizedGlm
from hdapprox.oracle import (
    OracleEstimate,
    closed_form_density,
    closed_form_log_normalizer,
    importance_log_normalizer,
    quadrature_log_marginal,
    quadrature_log_normalizer,
)
from hdapprox.utils.io_utils import decode_json, decode_run_csv, encode_json, encode_run_csv
from hdapprox.utils.linalg_utils import chol_inverse
from hdapprox.utils.seed_utils import cell_rng, make_rng

logger = logging.getLogger(__name__)

EXPERIMENTS = ("laplace-scaling", "marginal", "saddlepoint-exactness", "double-saddle", "diagnose")
ORACLES = {
    "laplace-scaling": ("auto", "closed-form", "quadrature", "importance-sampling"),
    "marginal": ("auto", "quadrature"),
    "saddlepoint-exactness": ("auto", "closed-form"),
    "double-saddle": ("auto", "closed-form"),
    "diagnose": ("auto",),
}
MODEL_KINDS = {
    "laplace-scaling": ("target", "both"),
    "marginal": ("target", "both"),
    "saddlepoint-exactness": ("cumulant", "both"),
    "double-saddle": ("both",),
    "diagnose": ("target", "both"),
}
ORACLE_STREAM = 1  # extra seed key separating oracle draws from data draws

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CELL_ERRORS = 2


@dataclass(frozen=True)
class ExperimentConfig:
    """
    JSON-configured experiment. p_rule is {"kind": "fixed", "p": int} or
    {"kind": "power", "alpha": float} with p = round(n^alpha), alpha in [0, 1).
    """

    experiment: str
    model: str
    n_grid: Tuple[int, ...]
    p_rule: Dict[str, Any]
    model_params: Dict[str, Any] = field(default_factory=dict)
    replicates: int = 1
    seed: int = 0
    oracle: str = "auto"
    oracle_params: Dict[str, Any] = field(default_factory=dict)
    output: Optional[str] = None
    experiment_params: Dict[str, Any] = field(default_factory=dict)
    prediction: Optional[str] = None

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(unknown)}")
        missing = sorted(k for k in ("experiment", "model", "n_grid", "p_rule") if k not in d)
        if missing:
            raise ConfigError(f"missing config fields: {', '.join(missing)}")
        values = dict(d)
        values["n_grid"] = tuple(values["n_grid"])
        config = cls(**values)
        config._validate()
        return config

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out["n_grid"] = list(self.n_grid)
        return out

    def _validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.model not in registry:
            raise ConfigError(f"unknown model {self.model!r}")
        if spec(self.model).kind not in MODEL_KINDS[self.experiment]:
            raise ConfigError(f"model {self.model!r} cannot be used for {self.experiment}")
        if not self.n_grid or any(
            not isinstance(n, int) or isinstance(n, bool) or n < 1 for n in self.n_grid
        ):
            raise ConfigError("n_grid must be a non-empty list of positive integers")
        kind = self.p_rule.get("kind") if isinstance(self.p_rule, dict) else None
        if kind == "fixed":
            if set(self.p_rule) != {"kind", "p"} or not isinstance(self.p_rule["p"], int):
                raise ConfigError('fixed p_rule is {"kind": "fixed", "p": <int>}')
            if self.p_rule["p"] < 1:
                raise ConfigError("fixed p must be positive")
        elif kind == "power":
            if set(self.p_rule) != {"kind", "alpha"}:
                raise ConfigError('power p_rule is {"kind": "power", "alpha": <float>}')
            if not 0 <= float(self.p_rule["alpha"]) < 1:
                raise ConfigError("p = n^alpha needs 0 <= alpha < 1")
        else:
            raise ConfigError(f"unknown p_rule {self.p_rule!r}")
        if self.replicates < 1:
            raise ConfigError("replicates must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.oracle not in ORACLES[self.experiment]:
            raise ConfigError(
                f"oracle {self.oracle!r} is not available for {self.experiment}; "
                f"choose from {', '.join(ORACLES[self.experiment])}"
            )
        if self.prediction is not None and self.prediction not in RATE_SOURCES:
            raise ConfigError(f"unknown prediction source {self.prediction!r}")

    def p_for(self, n: int) -> int:
        if self.p_rule["kind"] == "fixed":
            return int(self.p_rule["p"])
        # half-up rounding
        return max(1, int(math.floor(n ** float(self.p_rule["alpha"]) + 0.5)))

    def grid(self) -> List[Tuple[int, int, int]]:
        return sorted(
            {(n, self.p_for(n), r) for n in self.n_grid for r in range(self.replicates)}
        )


@dataclass
class ScalingRun:
    config: ExperimentConfig
    cells: List[Dict[str, Any]]
    fitted: Optional[ScalingFit] = None
    prediction: Optional[RatePrediction] = None
    reports: Dict[Tuple[int, int, int], AssumptionReport] = field(default_factory=dict)

    @property
    def error_count(self) -> int:
        return sum(1 for c in self.cells if c.get("error"))


def _rel_error(log_approx: float, log_oracle: float) -> float:
    return abs(math.expm1(log_approx - log_oracle))


def _row(n, p, rep, method, log_approx=math.nan, oracle: Optional[OracleEstimate] = None):
    log_oracle = math.nan if oracle is None else oracle.value
    return {
        "n": n,
        "p": p,
        "replicate": rep,
        "method": method,
        "log_approx": float(log_approx),
        "log_oracle": float(log_oracle),
        "oracle_se": math.nan if oracle is None else float(oracle.std_error),
        "rel_error": _rel_error(log_approx, log_oracle)
        if math.isfinite(log_approx) and math.isfinite(log_oracle)
        else math.nan,
        "runtime_ms": None,
        "error": None,
    }


def _build(config: ExperimentConfig, n: int, p: int, rng: np.random.Generator):
    return make(config.model, n=n, p=p, rng=rng, **config.model_params)


def _laplace_cell(config, n, p, rep, rng, reports):
    model = _build(config, n, p, rng)
    mode = find_mode(model)
    oracle = config.oracle
    if oracle == "auto":
        if hasattr(model, "exact_log_normalizer"):
            oracle = "closed-form"
        else:
            oracle = "quadrature" if model.dim_p <= 3 else "importance-sampling"
    if oracle == "closed-form":
        estimate = closed_form_log_normalizer(model)
    elif oracle == "quadrature":
        estimate = quadrature_log_normalizer(model, mode, **config.oracle_params)
    else:
        estimate = importance_log_normalizer(
            model,
            mode,
            rng=make_rng(config.seed, n, p, rep, ORACLE_STREAM),
            **config.oracle_params,
        )
    return [_row(n, p, rep, "laplace", laplace_log_normalizer(mode), estimate)]


def _marginal_cell(config, n, p, rep, rng, reports):
    params = config.experiment_params
    index = int(params.get("interest_index", 0))
    model = _build(config, n, p, rng)
    if params.get("mean_parametrize", False):
        if not isinstance(model, GlmModel):
            raise ValueError("mean parametrisation needs a GLM model")
        model = MeanParametrizedGlm(model, index, params.get("mean_prior_sd"))
    mode = find_mode(model)
    sd = math.sqrt(chol_inverse(mode.neg_hess_chol)[index, index])
    rows = []
    for k in params.get("psi_offset_sds", [0.0, 1.0]):
        psi = float(mode.theta_hat[index] + k * sd)
        approx = marginal_laplace_log_density(model, index, psi, mode)
        estimate = quadrature_log_marginal(model, mode, index, psi, **config.oracle_params)
        rows.append(_row(n, p, rep, f"marginal-laplace@{k:+g}sd", approx, estimate))
    return rows


def _cgf_points(cgf: CumulantModel, offsets: Sequence[float]):
    mean = cgf.k_grad(np.zeros(cgf.dim_p))
    sd = np.sqrt(np.diag(cgf.k_hess(np.zeros(cgf.dim_p))))
    return [(k, mean + k * sd) for k in offsets], mean, sd


def _saddlepoint_cell(config, n, p, rep, rng, reports):
    params = config.experiment_params
    cgf = _build(config, n, p, rng)
    exact = getattr(cgf, "exact_log_density", None)
    points, mean, sd = _cgf_points(cgf, params.get("offset_sds", [-1.0, 0.0, 1.0]))
    renormalize = bool(params.get("renormalize", False))
    log_const = 0.0
    if renormalize:
        if cgf.dim_p != 1:
            raise ValueError("renormalisation is available for one-dimensional CGFs only")
        hw = float(params.get("half_width_sds", 20.0))
        bounds = (float(mean[0] - hw * sd[0]), float(mean[0] + hw * sd[0]))
        _, log_const = renormalize_1d(lambda x: saddlepoint_log_density(cgf, x), bounds)
    method = "saddlepoint-renormalized" if renormalize else "saddlepoint"
    rows = []
    for k, s in points:
        approx = saddlepoint_log_density(cgf, s) - log_const
        if exact is None:
            row = _row(n, p, rep, f"{method}@{k:+g}sd", approx)
            row["error"] = f"no closed-form density for {cgf!r}"
        else:
            estimate = OracleEstimate(exact(s), 0.0, "closed-form", 1)
            row = _row(n, p, rep, f"{method}@{k:+g}sd", approx, estimate)
        rows.append(row)
    return rows


def _double_saddle_cell(config, n, p, rep, rng, reports):
    params = config.experiment_params
    model = _build(config, n, p, rng)
    if not isinstance(model, ExponentialMeansModel):
        raise ValueError("the double-saddle experiment needs the exp-means model")
    v = model.partial_sums()
    s2, pair_total = v[1:], v[1]

    def logdens(u1):
        return double_saddle_log_conditional(model, u1, s2).log_cond_density

    log_const = 0.0
    method = "double-saddle"
    if params.get("renormalize", True):
        _, log_const = renormalize_1d(logdens, (0.0, float(pair_total)))
        method = "double-saddle-renormalized"
    rows = []
    for f in params.get("fractions", [0.1, 0.3, 0.5, 0.7, 0.9]):
        u1 = float(f) * pair_total
        # u_1 given the later partial sums depends on u_1 + u_2 only
        exact = closed_form_density(
            "exp-means-conditional", {"m": model.m, "total": pair_total}, u1
        )
        estimate = OracleEstimate(exact, 0.0, "closed-form", 1)
        rows.append(_row(n, p, rep, f"{method}@{f:g}", logdens(u1) - log_const, estimate))
    return rows


def _diagnose_cell(config, n, p, rep, rng, reports):
    params = config.experiment_params
    model = _build(config, n, p, rng)
    mode = find_mode(model)
    reports[(n, p, rep)] = audit_assumptions(
        model,
        mode,
        samples=int(params.get("samples", 100)),
        seed=int(rng.integers(2**31)),
        ball_radius=params.get("ball_radius"),
        tail_draws=int(params.get("tail_draws", 0)),
    )
    return [_row(n, p, rep, "audit")]


CELL_RUNNERS: Dict[str, Callable] = {
    "laplace-scaling": _laplace_cell,
    "marginal": _marginal_cell,
    "saddlepoint-exactness": _saddlepoint_cell,
    "double-saddle": _double_saddle_cell,
    "diagnose": _diagnose_cell,
}
DEFAULT_METHODS = {
    "laplace-scaling": "laplace",
    "marginal": "marginal-laplace",
    "saddlepoint-exactness": "saddlepoint",
    "double-saddle": "double-saddle",
    "diagnose": "audit",
}


def _run_cell(config, timing, reports, cell):
    n, p, rep = cell
    start = time.perf_counter()
    try:
        rows = CELL_RUNNERS[config.experiment](
            config, n, p, rep, cell_rng(config.seed, n, p, rep), reports
        )
    except (Error, ValueError, ArithmeticError, np.linalg.LinAlgError) as e:
        logger.warning("cell n=%d p=%d replicate=%d failed: %s", n, p, rep, e)
        row = _row(n, p, rep, DEFAULT_METHODS[config.experiment])
        row["error"] = f"{type(e).__name__}: {e}"
        rows = [row]
    if timing:
        elapsed = 1000.0 * (time.perf_counter() - start)
        for row in rows:
            row["runtime_ms"] = elapsed
    return rows


def fit_cells(cells: Sequence[Dict[str, Any]]) -> Optional[ScalingFit]:
    points = [
        (c["n"], c["p"], c["rel_error"])
        for c in cells
        if not c.get("error") and math.isfinite(c["rel_error"]) and c["rel_error"] > 0
    ]
    try:
        return fit_scaling(points)
    except InsufficientSpread as e:
        logger.info("no exponent fit: %s", e)
        return None


def run_experiment(
    config: ExperimentConfig, threads: int = 1, timing: bool = False
) -> ScalingRun:
    """
    Run every (n, p, replicate) cell of the grid, recording per-cell failures instead of
    aborting, then fit the error exponents. Rows come back in (n, p, replicate) order
    whatever the completion order.
    """
    if threads < 1:
        raise ConfigError("threads must be positive")
    reports: Dict[Tuple[int, int, int], AssumptionReport] = {}
    grid = config.grid()
    logger.info("running %s on %d cells with %d threads", config.experiment, len(grid), threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(lambda c: _run_cell(config, timing, reports, c), grid))
    cells = [row for rows in results for row in rows]
    fitted = None if config.experiment == "diagnose" else fit_cells(cells)
    prediction = None if config.prediction is None else rate_prediction(config.prediction)
    return ScalingRun(config, cells, fitted, prediction, reports)


def emit_csv(run: ScalingRun, path: str) -> None:
    encode_run_csv(run.cells, path)


def _finite_or_none(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite_or_none(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite_or_none(v) for v in obj]
    return obj


def emit_json(run: ScalingRun, path: str) -> None:
    summary = {
        "config": run.config.to_dict(),
        "cells": len(run.cells),
        "errors": run.error_count,
        "fitted": None if run.fitted is None else run.fitted.to_dict(),
        "prediction": None if run.prediction is None else run.prediction.to_dict(),
        "predicted": []
        if run.prediction is None
        else [
            {"n": n, "p": p, "rate": predicted_rate(run.prediction, n, p)}
            for n, p in sorted({(c["n"], c["p"]) for c in run.cells})
        ],
        "reports": [
            dict(n=n, p=p, replicate=r, **run.reports[(n, p, r)].to_dict())
            for n, p, r in sorted(run.reports)
        ],
    }
    encode_json(_finite_or_none(summary), path)


def fit_from_csv(path: str) -> Optional[ScalingFit]:
    frame = decode_run_csv(path)
    cells = [
        {
            "n": int(row.n),
            "p": int(row.p),
            "rel_error": float(row.rel_error),
            "error": None if not isinstance(row.error, str) else row.error,
        }
        for row in frame.itertuples(index=False)
    ]
    return fit_cells(cells)


def load_config(path: str, experiment: str, seed: Optional[int], out: Optional[str]):
    raw = decode_json(path)
    if not isinstance(raw, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    raw.setdefault("experiment", experiment)
    if raw["experiment"] != experiment:
        raise ConfigError(
            f"config is for {raw['experiment']!r} but the subcommand is {experiment!r}"
        )
    if seed is not None:
        raw["seed"] = seed
    if out is not None:
        raw["output"] = out
    config = ExperimentConfig.from_dict(raw)
    if config.output is None:
        raise ConfigError("no output path: set 'output' in the config or pass --out")
    return config


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hdapprox",
        description="Laplace and saddlepoint approximation experiments against oracles.",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for tag in EXPERIMENTS:
        cmd = sub.add_parser(tag, help=f"run the {tag} experiment")
        cmd.add_argument("--config", required=True, help="JSON experiment config")
        cmd.add_argument("--out", help="CSV output path (overrides the config)")
        cmd.add_argument("--seed", type=int, help="seed (overrides the config)")
        cmd.add_argument("--threads", type=int, default=1, help="parallel grid cells")
        cmd.add_argument(
            "--timing", action="store_true", help="fill runtime_ms (output no longer byte-stable)"
        )
        cmd.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")

    try:
        config = load_config(args.config, args.experiment, args.seed, args.out)
        run = run_experiment(config, threads=args.threads, timing=args.timing)
        emit_csv(run, config.output)
        emit_json(run, config.output + ".json")
    except (ConfigError, OSError, ValueError, TypeError) as e:
        logger.error("%s", e)
        return EXIT_FAILURE

    if run.fitted is not None:
        logger.info("fitted exponents a=%.4g b=%.4g (r2 %.4f)", run.fitted.a, run.fitted.b, run.fitted.r2)
    if run.error_count:
        logger.warning("%d of %d rows recorded errors", run.error_count, len(run.cells))
        return EXIT_CELL_ERRORS
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
