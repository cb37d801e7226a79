"""Inferential layer: outcome models linking pre-grasp conditions to performance.

Binary success is fit with maximum-likelihood logistic regression; stability
and efficiency with fractional logit (Bernoulli quasi-likelihood, identical
score equations, sandwich standard errors). The design pairs the three
graspability predictors with gripper dummies and their interactions, rigid as
the reference level.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import DomainError, RankError
from .scoring import GripperType, TrialOutcome, TrialRecord, score_trials

DESIGN_COLUMNS = (
    "intercept", "q_p", "q_c", "q_o",
    "finray", "suction",
    "q_p:finray", "q_c:finray", "q_o:finray",
    "q_p:suction", "q_c:suction", "q_o:suction",
)
PREDICTOR_ORDER = ("q_o", "q_p", "q_c")

IRLS_MAX_ITERATIONS = 100
IRLS_TOL = 1e-8
_PROB_CLIP = 1e-10
_CI_Z = 1.96
SEPARATION_COEF_LIMIT = 8.0
SEPARATION_SE_LIMIT = 50.0
SEPARATION_STALL_WINDOW = 10
SEPARATION_LL_EPS = 1e-10


class ModelOutcome(str, enum.Enum):
    SP = "sp"
    SB = "sb"
    SF = "sf"


class HalfTreatment(str, enum.Enum):
    """How 0.5 success outcomes enter the binary success model."""

    FAIL = "fail"
    SUCCESS = "success"
    DROP = "drop-row"


@dataclass(frozen=True)
class ModelSpec:
    outcome: ModelOutcome
    half_as: HalfTreatment = HalfTreatment.FAIL


@dataclass(frozen=True)
class DesignMatrix:
    """Model matrix plus response; build_design emits the canonical 12 columns."""

    columns: tuple[str, ...]
    x: np.ndarray
    y: np.ndarray
    outcome: str = ""

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 2 or x.shape[1] != len(self.columns):
            raise DomainError(f"design shape {x.shape} does not match {len(self.columns)} columns")
        if y.shape != (x.shape[0],):
            raise DomainError("response length does not match design rows")
        if np.any((y < 0) | (y > 1)):
            raise DomainError("responses must lie in [0, 1]")
        for name in ("finray", "suction"):
            if name in self.columns:
                col = x[:, self.columns.index(name)]
                if not np.all((col == 0) | (col == 1)):
                    raise DomainError(f"{name} dummy must be 0/1")
        if "finray" in self.columns and "suction" in self.columns:
            f = x[:, self.columns.index("finray")]
            s = x[:, self.columns.index("suction")]
            if np.any(f + s > 1):
                raise DomainError("gripper dummies must be one-hot per row")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)


@dataclass(frozen=True)
class FitResult:
    """Coefficients with Wald inference on the odds-ratio scale."""

    columns: tuple[str, ...]
    estimates: np.ndarray
    std_errors: np.ndarray
    se_info: np.ndarray
    se_robust: np.ndarray | None
    z_values: np.ndarray
    p_values: np.ndarray
    odds_ratios: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    log_likelihood: float
    converged: bool
    separation_flags: tuple[bool, ...]
    n_obs: int
    family: str
    coef_history: np.ndarray
    loglik_history: np.ndarray

    def predict_mean(self, x: np.ndarray) -> np.ndarray:
        return _sigmoid(np.asarray(x, dtype=float) @ self.estimates)


@dataclass(frozen=True)
class PdpCurve:
    """Expected outcome along one predictor for one gripper level."""

    predictor: str
    gripper: GripperType
    grid: tuple[float, ...]
    values: tuple[float, ...]


@dataclass(frozen=True)
class OddsRatioRow:
    term: str
    coef: float
    odds_ratio: float
    p_value: float
    ci_low: float
    ci_high: float


def design_row(q_p: float, q_c: float, q_o: float, gripper: GripperType) -> np.ndarray:
    """One 12-column design row with rigid as the reference level."""
    finray = 1.0 if gripper == GripperType.FINRAY else 0.0
    suction = 1.0 if gripper == GripperType.SUCTION else 0.0
    return np.array([
        1.0, q_p, q_c, q_o,
        finray, suction,
        q_p * finray, q_c * finray, q_o * finray,
        q_p * suction, q_c * suction, q_o * suction,
    ])


def build_design(records: Sequence[TrialRecord], spec: ModelSpec) -> DesignMatrix:
    """Assemble the 12-column design and the response for one outcome."""
    if not records:
        raise DomainError("no records to build a design from")
    scored = score_trials(records)
    rows, resp = [], []
    for st in scored:
        if spec.outcome == ModelOutcome.SP:
            if st.record.outcome == TrialOutcome.DROPPED_TRANSIT:
                if spec.half_as == HalfTreatment.DROP:
                    continue
                y = 1.0 if spec.half_as == HalfTreatment.SUCCESS else 0.0
            else:
                y = st.s_p
        elif spec.outcome == ModelOutcome.SB:
            y = st.s_b
        else:
            y = st.s_f
        rows.append(design_row(st.record.q_p, st.q_c, st.record.q_o, st.record.gripper))
        resp.append(y)
    return DesignMatrix(DESIGN_COLUMNS, np.array(rows), np.array(resp), spec.outcome.value)


def _sigmoid(eta: np.ndarray) -> np.ndarray:
    out = np.empty_like(eta, dtype=float)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _quasi_loglik(x: np.ndarray, y: np.ndarray, beta: np.ndarray) -> float:
    p = np.clip(_sigmoid(x @ beta), _PROB_CLIP, 1.0 - _PROB_CLIP)
    return float(np.sum(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def _check_rank(design: DesignMatrix) -> None:
    x = design.x
    _, r, pivots = scipy.linalg.qr(x, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = max(x.shape) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    if rank < x.shape[1]:
        raise RankError(design.columns[j] for j in sorted(pivots[rank:]))


def _irls(x: np.ndarray, y: np.ndarray):
    """Newton/IRLS for the logit mean; log-likelihood never decreases."""
    beta = np.zeros(x.shape[1])
    ll = _quasi_loglik(x, y, beta)
    coef_history = [beta.copy()]
    ll_history = [ll]
    converged = False
    for _ in range(IRLS_MAX_ITERATIONS):
        p = np.clip(_sigmoid(x @ beta), _PROB_CLIP, 1.0 - _PROB_CLIP)
        w = p * (1.0 - p)
        hessian = x.T @ (x * w[:, None])
        score = x.T @ (y - p)
        try:
            delta = np.linalg.solve(hessian, score)
        except np.linalg.LinAlgError:
            delta = np.linalg.lstsq(hessian, score, rcond=None)[0]
        step = 1.0
        candidate_ll = _quasi_loglik(x, y, beta + delta)
        while candidate_ll < ll and step > 1e-10:
            step *= 0.5
            candidate_ll = _quasi_loglik(x, y, beta + step * delta)
        if candidate_ll < ll:
            converged = True  # stalled: no ascent direction left
            break
        applied = step * delta
        beta = beta + applied
        ll = candidate_ll
        coef_history.append(beta.copy())
        ll_history.append(ll)
        if np.max(np.abs(applied)) < IRLS_TOL:
            converged = True
            break
    p = np.clip(_sigmoid(x @ beta), _PROB_CLIP, 1.0 - _PROB_CLIP)
    hessian = x.T @ (x * (p * (1.0 - p))[:, None])
    try:
        info_cov = np.linalg.inv(hessian)
    except np.linalg.LinAlgError:
        info_cov = np.linalg.pinv(hessian)
    return beta, p, info_cov, np.array(coef_history), np.array(ll_history), converged


def _stall_flags(coef_history: np.ndarray, ll_history: np.ndarray) -> np.ndarray:
    k = coef_history.shape[1]
    flags = np.zeros(k, dtype=bool)
    w = SEPARATION_STALL_WINDOW
    if coef_history.shape[0] < w + 1:
        return flags
    tail = np.abs(coef_history[-(w + 1):])
    ll_gain = ll_history[-1] - ll_history[-(w + 1)]
    if ll_gain > SEPARATION_LL_EPS:
        return flags
    for j in range(k):
        diffs = np.diff(tail[:, j])
        if np.all(diffs > 0):
            flags[j] = True
    return flags


def _assemble_fit(design: DesignMatrix, beta, info_cov, coef_history,
                  ll_history, converged, family: str,
                  robust_cov: np.ndarray | None) -> FitResult:
    se_info = np.sqrt(np.maximum(np.diag(info_cov), 0.0))
    se_robust = None
    if robust_cov is not None:
        se_robust = np.sqrt(np.maximum(np.diag(robust_cov), 0.0))
    se = se_robust if se_robust is not None else se_info
    z = beta / np.where(se > 0, se, np.nan)
    pvals = np.array([2.0 * (1.0 - _normal_cdf(abs(float(v)))) for v in z])
    with np.errstate(over="ignore"):  # separated fits legitimately overflow to inf
        odds = np.exp(beta)
        ci_low = np.exp(beta - _CI_Z * se)
        ci_high = np.exp(beta + _CI_Z * se)
    flags = (np.abs(beta) > SEPARATION_COEF_LIMIT) | (se > SEPARATION_SE_LIMIT) \
        | _stall_flags(coef_history, ll_history)
    return FitResult(
        columns=design.columns,
        estimates=beta,
        std_errors=se,
        se_info=se_info,
        se_robust=se_robust,
        z_values=z,
        p_values=pvals,
        odds_ratios=odds,
        ci_low=ci_low,
        ci_high=ci_high,
        log_likelihood=float(ll_history[-1]),
        converged=converged,
        separation_flags=tuple(bool(f) for f in flags),
        n_obs=design.x.shape[0],
        family=family,
        coef_history=coef_history,
        loglik_history=ll_history,
    )


def fit_logistic(design: DesignMatrix) -> FitResult:
    """Maximum-likelihood logistic regression; information-based standard errors."""
    if not np.all((design.y == 0) | (design.y == 1)):
        raise DomainError("logistic regression requires a binary response")
    _check_rank(design)
    beta, _, info_cov, coef_h, ll_h, converged = _irls(design.x, design.y)
    return _assemble_fit(design, beta, info_cov, coef_h, ll_h, converged,
                         "logistic", robust_cov=None)


def fit_fractional_logit(design: DesignMatrix) -> FitResult:
    """Quasi-ML fractional logit; sandwich (robust) standard errors."""
    _check_rank(design)
    x, y = design.x, design.y
    beta, p, info_cov, coef_h, ll_h, converged = _irls(x, y)
    resid = y - p
    meat = x.T @ (x * (resid ** 2)[:, None])
    robust_cov = info_cov @ meat @ info_cov
    return _assemble_fit(design, beta, info_cov, coef_h, ll_h, converged,
                         "fractional", robust_cov=robust_cov)


def _normal_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def wald_test(estimate: float, se: float) -> tuple[float, float]:
    """z statistic and two-sided normal p-value."""
    if se <= 0:
        raise DomainError(f"standard error must be positive, got {se}")
    z = estimate / se
    return z, 2.0 * (1.0 - _normal_cdf(abs(z)))


def detect_separation(design: DesignMatrix, fit: FitResult) -> tuple[bool, ...]:
    """Per-coefficient quasi-complete-separation flags.

    A coefficient is suspect when its magnitude exceeds 8, its standard error
    exceeds 50, or it grew monotonically over the last 10 iterations with no
    real likelihood improvement.
    """
    flags = (np.abs(fit.estimates) > SEPARATION_COEF_LIMIT) \
        | (fit.std_errors > SEPARATION_SE_LIMIT) \
        | _stall_flags(fit.coef_history, fit.loglik_history)
    return tuple(bool(f) for f in flags)


def odds_ratio_table(fit: FitResult) -> list[OddsRatioRow]:
    """Coefficient table on the odds-ratio scale, intercept excluded."""
    rows = []
    for j, name in enumerate(fit.columns):
        if name == "intercept":
            continue
        rows.append(OddsRatioRow(
            term=name,
            coef=float(fit.estimates[j]),
            odds_ratio=float(fit.odds_ratios[j]),
            p_value=float(fit.p_values[j]),
            ci_low=float(fit.ci_low[j]),
            ci_high=float(fit.ci_high[j]),
        ))
    return rows


def format_odds_ratio_row(row: OddsRatioRow) -> tuple[str, str, str, str, str, str]:
    """Fixed formatting: 4-decimal coef, 3-decimal OR / p / CI bounds."""
    return (row.term, f"{row.coef:.4f}", f"{row.odds_ratio:.3f}", f"{row.p_value:.3f}",
            f"{row.ci_low:.3f}", f"{row.ci_high:.3f}")


def pearson_correlations(records: Sequence[TrialRecord]) -> np.ndarray:
    """3x3 Pearson matrix over (q_o, q_p, q_c), in PREDICTOR_ORDER."""
    if len(records) < 2:
        raise DomainError("need at least 2 records for correlations")
    data = {
        "q_o": np.array([r.q_o for r in records], dtype=float),
        "q_p": np.array([r.q_p for r in records], dtype=float),
        "q_c": np.array([r.q_c for r in records], dtype=float),
    }
    for name, v in data.items():
        if np.std(v) == 0:
            raise DomainError(f"{name} has zero variance; correlation undefined")
    out = np.eye(3)
    for i, a in enumerate(PREDICTOR_ORDER):
        for j, b in enumerate(PREDICTOR_ORDER):
            if i < j:
                va, vb = data[a] - data[a].mean(), data[b] - data[b].mean()
                r = float(np.sum(va * vb) / math.sqrt(np.sum(va ** 2) * np.sum(vb ** 2)))
                out[i, j] = out[j, i] = r
    return out


def silverman_bandwidth(values: Sequence[float]) -> float:
    """Silverman's rule-of-thumb bandwidth for a Gaussian kernel."""
    v = np.asarray(values, dtype=float)
    n = len(v)
    if n == 0:
        raise DomainError("no values")
    sd = float(np.std(v, ddof=1)) if n > 1 else 0.0
    if n > 1:
        q75, q25 = np.percentile(v, [75, 25])
        iqr = float(q75 - q25)
        scale = min(sd, iqr / 1.349) if iqr > 0 else sd
    else:
        scale = 0.0
    if scale == 0:
        scale = max(abs(float(v[0])), 1.0) * 0.1 if n == 1 else 1e-3
    return 0.9 * scale * n ** (-0.2)


def kernel_density(values: Sequence[float], bandwidth: float, grid: Sequence[float]) -> np.ndarray:
    """Gaussian kernel density estimate evaluated on the grid."""
    if bandwidth <= 0:
        raise DomainError(f"bandwidth must be positive, got {bandwidth}")
    v = np.asarray(values, dtype=float)
    if len(v) == 0:
        raise DomainError("no values")
    g = np.asarray(grid, dtype=float)
    z = (g[:, None] - v[None, :]) / bandwidth
    phi = np.exp(-0.5 * z ** 2) / math.sqrt(2.0 * math.pi)
    return phi.sum(axis=1) / (len(v) * bandwidth)


def partial_dependence(fit: FitResult, records: Sequence[TrialRecord],
                       predictor: str, gripper: GripperType,
                       grid: Sequence[float]) -> PdpCurve:
    """Model-predicted mean as one predictor varies, averaged over the records.

    Every record has the predictor set to the grid value and its gripper forced
    to the requested level; the remaining covariates keep their observed values.
    """
    if predictor not in PREDICTOR_ORDER:
        raise DomainError(f"unknown predictor {predictor!r}")
    if not records:
        raise DomainError("no records to integrate over")
    base = [{"q_o": r.q_o, "q_p": r.q_p, "q_c": r.q_c} for r in records]
    values = []
    for g in grid:
        rows = []
        for b in base:
            cov = dict(b)
            cov[predictor] = float(g)
            rows.append(design_row(cov["q_p"], cov["q_c"], cov["q_o"], gripper))
        values.append(float(np.mean(fit.predict_mean(np.array(rows)))))
    return PdpCurve(predictor, gripper, tuple(float(g) for g in grid), tuple(values))


def pdp_curves_csv(curves: Sequence[PdpCurve]) -> str:
    """CSV serialization of PDP curves: predictor, gripper, grid, value."""
    lines = ["predictor,gripper,grid,value"]
    for c in curves:
        for g, v in zip(c.grid, c.values):
            lines.append(f"{c.predictor},{c.gripper.value},{g:.6g},{v:.6g}")
    return "\n".join(lines) + "\n"


def simulate_outcome_data(n: int, beta: Sequence[float], seed: int,
                          family: str = "logistic", dispersion: float = 20.0) -> DesignMatrix:
    """Draw iid trials from the 12-column design with a known coefficient vector.

    Predictors are uniform on [0, 1], the gripper factor is balanced, and the
    response mean is the logit-inverse of the linear predictor: Bernoulli draws
    for 'logistic', Beta draws with matching mean for 'fractional'.
    """
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (len(DESIGN_COLUMNS),):
        raise DomainError(f"expected {len(DESIGN_COLUMNS)} coefficients, got {beta.shape}")
    rng = np.random.default_rng(seed)
    grippers = list(GripperType)
    rows = []
    for i in range(n):
        q_p, q_c, q_o = rng.uniform(0, 1, size=3)
        rows.append(design_row(q_p, q_c, q_o, grippers[i % 3]))
    x = np.array(rows)
    mu = np.clip(_sigmoid(x @ beta), 1e-9, 1.0 - 1e-9)
    if family == "logistic":
        y = (rng.uniform(size=n) < mu).astype(float)
    elif family == "fractional":
        y = rng.beta(mu * dispersion, (1.0 - mu) * dispersion)
    else:
        raise DomainError(f"unknown family {family!r}")
    return DesignMatrix(DESIGN_COLUMNS, x, y, family)
