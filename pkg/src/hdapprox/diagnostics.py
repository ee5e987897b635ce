import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as la
import scipy.special as special

import hdapprox.typing
from hdapprox.approx.laplace import ModeResult, constrained_mode
from hdapprox.error import InsufficientSpread
from hdapprox.model import LogTargetModel
from hdapprox.utils.linalg_utils import (
    extreme_eigenvalues,
    inv_sqrt_inf_norm,
    max_abs_eigenvalue,
)
from hdapprox.utils.seed_utils import make_rng

logger = logging.getLogger(__name__)

REPORT_FIELDS = ("eta1", "eta2", "inf_norm_invsqrt", "c3_hat", "c4_hat", "gamma_n", "samples")
MAX_SLICES = 50
FOURTH_SLICE_POINTS = 10
ZETA = 6
UNCHECKED_ORDERS = (5, 6)
UNVERIFIABLE = (
    "bounds on imaginary-part CGF derivatives off the real axis: not checkable with "
    "real-axis evaluation",
)
MIN_CELLS = 6


@dataclass(frozen=True)
class AssumptionReport:
    """
    Numerical audit of a fitted model around its mode.

    :param eta1, eta2:          min / max eigenvalue of -g'' over the sampled ball, divided by n
    :param inf_norm_invsqrt:    max-row-sum norm of (-g''(mode))^(-1/2)
    :param c3_hat, c4_hat:      log_n of the largest eigenvalue magnitude of the third / fourth
                                derivative slices; -inf when the slices vanish
    :param gamma_n:             sqrt(log(n) p / n)
    :param ball_radius:         radius of the sampled ball
    :param samples:             number of ball points
    :param fd_fallback:         True when any slice came from finite differences
    :param tail_mass_proxy:     importance-sampling mass outside the ball (a proxy for the tail
                                mass sequence, which is not measurable directly)
    """

    eta1: float
    eta2: float
    inf_norm_invsqrt: float
    c3_hat: float
    c4_hat: float
    gamma_n: float
    ball_radius: float
    samples: int
    fd_fallback: bool = False
    zeta: int = ZETA
    unchecked_orders: Tuple[int, ...] = UNCHECKED_ORDERS
    tail_mass_proxy: Optional[float] = None
    unverifiable: Tuple[str, ...] = UNVERIFIABLE

    def to_dict(self) -> Dict[str, object]:
        out = asdict(self)
        out["unchecked_orders"] = list(self.unchecked_orders)
        out["unverifiable"] = list(self.unverifiable)
        return out

    def to_json(self) -> str:
        """
        JSON object with the fixed report fields first; non-finite numbers become null.
        """
        d = self.to_dict()
        ordered = {k: d.pop(k) for k in REPORT_FIELDS}
        ordered.update(d)
        for k, v in ordered.items():
            if isinstance(v, float) and not math.isfinite(v):
                ordered[k] = None
        return json.dumps(ordered, indent=2)


def _ball_points(center, radius, count, rng) -> np.ndarray:
    p = center.shape[0]
    directions = rng.standard_normal((count, p))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = radius * rng.random(count) ** (1.0 / p)
    return center + directions * radii[:, None]


def _log_n(value: float, n: int) -> float:
    if value <= 0:
        return -np.inf
    if n <= 1:
        return np.nan
    return float(np.log(value) / np.log(n))


def _slice_indices(p: int, rng: np.random.Generator) -> np.ndarray:
    if p <= MAX_SLICES:
        return np.arange(p)
    return np.sort(rng.choice(p, MAX_SLICES, replace=False))


def _pair_indices(p: int, rng: np.random.Generator) -> List[Tuple[int, int]]:
    if p * p <= MAX_SLICES:
        return [(l, m) for l in range(p) for m in range(p)]
    flat = np.sort(rng.choice(p * p, MAX_SLICES, replace=False))
    return [(int(k // p), int(k % p)) for k in flat]


def audit_assumptions(
    model: LogTargetModel,
    mode: ModeResult,
    samples: int = 100,
    seed: int = 0,
    ball_radius: Optional[float] = None,
    tail_draws: int = 0,
) -> AssumptionReport:
    """
    :param model:           the log target
    :param mode:            its mode
    :param samples:         points drawn uniformly in the ball around the mode
    :param seed:            seed of the sampling stream
    :param ball_radius:     sampled radius, gamma_n when omitted
    :param tail_draws:      proposal draws for the tail-mass proxy, skipped when 0
    Curvature eigenvalues are taken over the ball; third slices at the mode; fourth slices
    at the mode and at the first ten ball points. Above fifty slices a seeded subset is used.
    """
    if samples < 1:
        raise ValueError("audit_assumptions needs at least one sample")
    n, p = model.sample_n, model.dim_p
    rng = make_rng(seed)
    gamma_n = math.sqrt(math.log(n) * p / n)
    radius = gamma_n if ball_radius is None else float(ball_radius)
    theta_hat = mode.theta_hat

    points = _ball_points(theta_hat, radius, samples, rng)
    lows, highs = [], []
    for theta in points:
        lo, hi = extreme_eigenvalues(-model.hess(theta))
        lows.append(lo)
        highs.append(hi)
    eta1, eta2 = min(lows) / n, max(highs) / n

    inf_norm = inv_sqrt_inf_norm(-model.hess(theta_hat))

    third = max(
        max_abs_eigenvalue(model.third_slice(theta_hat, int(l))) for l in _slice_indices(p, rng)
    )
    pairs = _pair_indices(p, rng)
    fourth = 0.0
    for theta in [theta_hat] + list(points[:FOURTH_SLICE_POINTS]):
        for l, m in pairs:
            fourth = max(fourth, max_abs_eigenvalue(model.fourth_slice(theta, l, m)))

    tail_mass = None
    if tail_draws > 0:
        tail_mass = _tail_mass_proxy(model, mode, radius, tail_draws, rng)

    report = AssumptionReport(
        eta1=float(eta1),
        eta2=float(eta2),
        inf_norm_invsqrt=float(inf_norm),
        c3_hat=_log_n(third, n),
        c4_hat=_log_n(fourth, n),
        gamma_n=gamma_n,
        ball_radius=radius,
        samples=samples,
        fd_fallback=not (
            model.has_analytic("third_slice") and model.has_analytic("fourth_slice")
        ),
        tail_mass_proxy=tail_mass,
    )
    logger.info("audit of %r: eta1=%.4g eta2=%.4g", model, report.eta1, report.eta2)
    return report


def _tail_mass_proxy(model, mode, radius, draws, rng) -> float:
    """
    Fraction of importance-sampling mass falling outside the ball, Laplace proposal.
    """
    z = rng.standard_normal((draws, model.dim_p))
    offsets = la.solve_triangular(mode.neg_hess_chol.T, z.T, lower=False).T
    log_w = model.eval_many(mode.theta_hat + offsets) - mode.g_at_mode + 0.5 * np.sum(z**2, 1)
    outside = np.linalg.norm(offsets, axis=1) > radius
    if not np.any(outside):
        return 0.0
    return float(np.exp(special.logsumexp(log_w[outside]) - special.logsumexp(log_w)))


def measure_constrained_shift(
    model: LogTargetModel,
    mode: ModeResult,
    interest_index: int,
    psis: Sequence[float],
) -> hdapprox.typing.VectorType:
    """
    Distances between the joint mode and the constrained modes at each psi (raw measurements).
    """
    nuis = np.delete(np.arange(model.dim_p), interest_index)
    out = []
    for psi in psis:
        cm = constrained_mode(model, interest_index, psi, mode.theta_hat[nuis])
        out.append(float(np.linalg.norm(mode.theta_hat - cm.theta_hat_psi)))
    return np.asarray(out)


@dataclass(frozen=True)
class RateTerm:
    exponent_p: float
    exponent_n: float
    exponent_log_n: float = 0.0

    def __call__(self, n: float, p: float) -> float:
        return p**self.exponent_p * n**self.exponent_n * math.log(n) ** self.exponent_log_n


@dataclass(frozen=True)
class RatePrediction:
    """
    An error order max_k p^a_k n^b_k (log n)^c_k. The exponent fields describe the leading
    term, the one with the largest p exponent.
    """

    source: str
    terms: Tuple[RateTerm, ...]
    params: Dict[str, float] = field(default_factory=dict)

    @property
    def leading(self) -> RateTerm:
        return max(self.terms, key=lambda t: (t.exponent_p, t.exponent_n))

    @property
    def exponent_p(self) -> float:
        return self.leading.exponent_p

    @property
    def exponent_n(self) -> float:
        return self.leading.exponent_n

    @property
    def includes_log_n(self) -> bool:
        return self.leading.exponent_log_n != 0

    def to_dict(self) -> Dict[str, object]:
        return {
            "source": self.source,
            "exponent_p": self.exponent_p,
            "exponent_n": self.exponent_n,
            "includes_log_n": self.includes_log_n,
            "params": dict(self.params),
        }


def joint_rate(c_inf: float = 0.5, c3: float = 1.0, c4: float = 1.0, source="joint"):
    terms = (
        RateTerm(3 + 2 * c_inf, -(3 - 2 * c3)),
        RateTerm(2 + 2 * c_inf, -(2 - c4)),
    )
    return RatePrediction(source, terms, {"c_inf": c_inf, "c3": c3, "c4": c4})


def saddlepoint_rate(c_inf: float = 0.5, c3: float = 1.0, c4: float = 1.0):
    return joint_rate(c_inf, c3, c4, source="saddlepoint")


def marginal_rate(zeta: float = ZETA, c3: float = 1.0):
    terms = (
        RateTerm(2, -1, 2),
        RateTerm(zeta - 1, -(zeta - 2) / 2, zeta / 2),
        RateTerm(1, -(1.5 - c3), 0.5),
    )
    return RatePrediction("marginal", terms, {"zeta": zeta, "c3": c3})


def logistic_rate():
    return RatePrediction("logistic", (RateTerm(2, -1, 1),))


def glm_rate():
    return RatePrediction("glm", (RateTerm(3, -1, 1),))


def exp_regression_rate():
    return RatePrediction("exp-regression", (RateTerm(3, -1, 1),))


def fixed_p_rate():
    return RatePrediction("fixed-p", (RateTerm(0, -1),))


RATE_SOURCES: Dict[str, Callable[..., RatePrediction]] = {
    "joint": joint_rate,
    "marginal": marginal_rate,
    "saddlepoint": saddlepoint_rate,
    "logistic": logistic_rate,
    "glm": glm_rate,
    "exp-regression": exp_regression_rate,
    "fixed-p": fixed_p_rate,
}


def rate_prediction(source: str, **params) -> RatePrediction:
    try:
        factory = RATE_SOURCES[source]
    except KeyError:
        raise ValueError(
            f"unknown rate source {source!r}; choose from {', '.join(sorted(RATE_SOURCES))}"
        ) from None
    return factory(**params)


def predicted_rate(pred: RatePrediction, n: int, p: int) -> float:
    if n < 1 or p < 1:
        raise ValueError(f"predicted_rate needs n, p >= 1, got n={n}, p={p}")
    return max(term(float(n), float(p)) for term in pred.terms)


@dataclass(frozen=True)
class ScalingFit:
    a: float
    b: float
    se_a: float
    se_b: float
    r2: float
    residual: float
    cells: int
    c_log_log: Optional[float] = None

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


def fit_scaling(
    cells: Sequence[Tuple[int, int, float]], include_log_log: bool = False
) -> ScalingFit:
    """
    Least-squares fit of log error = const + a log p + b log n (+ c log log n).

    :param cells:           (n, p, error) triples with error > 0
    :param include_log_log: add a log log n column
    Needs at least six cells and two distinct n. With a single distinct p only the n
    exponent is fitted and a, se_a are NaN. The residual is the residual sum of squares.
    """
    cells = [(int(n), int(p), float(e)) for n, p, e in cells]
    if any(not (e > 0 and math.isfinite(e)) for _, _, e in cells):
        raise ValueError("fit_scaling needs finite positive errors")
    ns = np.asarray([c[0] for c in cells], dtype=float)
    ps = np.asarray([c[1] for c in cells], dtype=float)
    errs = np.asarray([c[2] for c in cells])
    if len(cells) < MIN_CELLS or np.unique(ns).size < 2:
        raise InsufficientSpread(
            f"need at least {MIN_CELLS} cells over two distinct n, got {len(cells)} cells "
            f"and {np.unique(ns).size} distinct n"
        )
    fit_p = np.unique(ps).size >= 2

    columns = [np.ones_like(ns)]
    if fit_p:
        columns.append(np.log(ps))
    columns.append(np.log(ns))
    if include_log_log:
        if np.any(ns <= math.e):
            raise InsufficientSpread("log log n needs every n > e")
        columns.append(np.log(np.log(ns)))
    design = np.column_stack(columns)
    target = np.log(errs)
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise InsufficientSpread("log p and log n columns are collinear on this grid")

    coef, _, _, _ = np.linalg.lstsq(design, target, rcond=None)
    resid = target - design @ coef
    rss = float(resid @ resid)
    dof = design.shape[0] - design.shape[1]
    if dof > 0:
        cov = rss / dof * np.linalg.inv(design.T @ design)
        se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    else:
        se = np.full(design.shape[1], np.nan)
    tss = float(np.sum((target - target.mean()) ** 2))
    r2 = 1.0 - rss / tss if tss > 0 else 1.0

    b_index = 2 if fit_p else 1
    return ScalingFit(
        a=float(coef[1]) if fit_p else float("nan"),
        b=float(coef[b_index]),
        se_a=float(se[1]) if fit_p else float("nan"),
        se_b=float(se[b_index]),
        r2=r2,
        residual=rss,
        cells=len(cells),
        c_log_log=float(coef[-1]) if include_log_log else None,
    )
