"""Regression core: OLS, Poisson-family GLM, and clustered covariance.

Implements the three estimation building blocks the bilateral flow
regressions need:

* least squares on a named design matrix, solved by orthogonal
  decomposition with explicit rank diagnostics;
* Poisson score equations solved by iteratively reweighted least squares
  (the pseudo-maximum-likelihood estimator for multiplicative flow
  models, valid with zero-valued outcomes);
* sandwich covariance clustered along one or two overlapping dimensions,
  ``V = V_a + V_b - V_ab``, with eigenvalue clamping when the three-term
  formula leaves the matrix indefinite.

All estimation is dense and deterministic: at a few thousand rows and a
few hundred columns there is nothing to be gained from sparse or
absorbed fixed effects, so destination effects are plain dummy columns.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "EstimationError",
    "RankDeficiencyError",
    "SeparationError",
    "ConvergenceError",
    "DesignMatrix",
    "FixedEffectsInfo",
    "FitResult",
    "fit_ols",
    "fit_glm_poisson",
    "add_fixed_effects",
    "sandwich_cov_twoway",
    "with_twoway_cluster",
]

# exp() must stay finite: overflow above ~709, graceful underflow to 0 below ~-745
_ETA_LOW = -745.0
_ETA_HIGH = 600.0
_MAX_HALVINGS = 20


class EstimationError(Exception):
    """Base class for estimation failures."""


class RankDeficiencyError(EstimationError):
    def __init__(self, columns: list[str]):
        self.columns = columns
        super().__init__(f"design matrix is rank deficient; collinear columns: {', '.join(columns)}")


class SeparationError(EstimationError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(
            f"column {column!r} perfectly separates the outcome (all zero outcomes on its "
            "support); its coefficient diverges"
        )


class ConvergenceError(EstimationError):
    def __init__(self, message: str, trace: list[tuple[int, float, float]]):
        self.trace = trace
        super().__init__(message)


@dataclass
class FixedEffectsInfo:
    group: str
    reference: str
    dropped_rows: int
    dropped_groups: list[str]
    dropped_columns: list[str]


@dataclass
class DesignMatrix:
    """Named regressor matrix with outcome and two cluster-label vectors."""

    x: np.ndarray
    columns: list[str]
    y: np.ndarray
    cluster_origin: np.ndarray
    cluster_dest: np.ndarray
    fe_info: FixedEffectsInfo | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.cluster_origin = np.asarray(self.cluster_origin)
        self.cluster_dest = np.asarray(self.cluster_dest)
        n, k = self.x.shape
        if len(self.columns) != k:
            raise ValueError(f"{len(self.columns)} names for {k} columns")
        if len(set(self.columns)) != k:
            raise ValueError("column names are not unique")
        for length, what in (
            (len(self.y), "outcome"),
            (len(self.cluster_origin), "origin cluster ids"),
            (len(self.cluster_dest), "destination cluster ids"),
        ):
            if length != n:
                raise ValueError(f"{what} length {length} != {n} rows")
        if not np.all(np.isfinite(self.x)):
            raise ValueError("design matrix contains non-finite values")
        if not np.all(np.isfinite(self.y)):
            raise ValueError("outcome contains non-finite values")
        dead = [name for j, name in enumerate(self.columns) if not np.any(self.x[:, j])]
        if dead:
            raise ValueError(f"all-zero columns: {', '.join(dead)}")

    @property
    def n_obs(self) -> int:
        return self.x.shape[0]


@dataclass
class FitResult:
    """Coefficients, covariance and diagnostics for one estimated model."""

    columns: list[str]
    beta: np.ndarray
    cov: np.ndarray
    n_obs: int
    estimator: str
    fe: str = "none"
    iterations: int = 0
    step_norm: float = 0.0
    fitted: np.ndarray | None = None
    residuals: np.ndarray | None = None
    scores: np.ndarray | None = field(default=None, repr=False)
    bread: np.ndarray | None = field(default=None, repr=False)

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.cov))

    def coef(self, name: str) -> float:
        return float(self.beta[self.columns.index(name)])

    def coef_se(self, name: str) -> float:
        return float(self.se[self.columns.index(name)])

    def pvalue(self, name: str) -> float:
        se = self.coef_se(name)
        if not se > 0:
            return float("nan")
        z = abs(self.coef(name)) / se
        return math.erfc(z / math.sqrt(2.0))

    def stars(self, name: str) -> str:
        p = self.pvalue(name)
        if math.isnan(p):
            return ""
        if p < 0.01:
            return "***"
        if p < 0.05:
            return "**"
        if p < 0.10:
            return "*"
        return ""


def _qr_rank_check(x: np.ndarray, columns: list[str]) -> None:
    """Flag columns that add no new direction to their predecessors."""
    r = np.linalg.qr(x, mode="r")
    diag = np.abs(np.diag(r))
    tol = max(x.shape) * np.finfo(float).eps * (diag.max() if diag.size else 0.0)
    offenders = [columns[j] for j in range(len(diag)) if diag[j] <= tol]
    if offenders:
        raise RankDeficiencyError(offenders)


def _bread_from_weighted(x: np.ndarray, w: np.ndarray | None = None) -> np.ndarray:
    """(X'WX)^-1 via the triangular factor of a QR decomposition."""
    xw = x if w is None else x * np.sqrt(w)[:, None]
    r = np.linalg.qr(xw, mode="r")
    r_inv = np.linalg.solve(r, np.eye(r.shape[0]))
    # vanishing weights have no curvature; let the variance overflow to inf
    with np.errstate(over="ignore"):
        return r_inv @ r_inv.T


def fit_ols(design: DesignMatrix) -> FitResult:
    """Least squares on the design's outcome (already log-transformed upstream)."""
    x, y = design.x, design.y
    _qr_rank_check(x, design.columns)
    beta, *_ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ beta
    n, k = x.shape
    bread = _bread_from_weighted(x)
    sigma2 = float(resid @ resid / (n - k)) if n > k else float("nan")
    return FitResult(
        columns=list(design.columns),
        beta=beta,
        cov=sigma2 * bread,
        n_obs=n,
        estimator="ols",
        fe="none" if design.fe_info is None else design.fe_info.group,
        fitted=x @ beta,
        residuals=resid,
        scores=x * resid[:, None],
        bread=bread,
    )


def _poisson_loglik(y: np.ndarray, eta: np.ndarray, mu: np.ndarray) -> float:
    # constant log(y!) terms dropped; only differences matter
    return float(y @ eta - mu.sum())


def _check_separation(x: np.ndarray, columns: list[str], y: np.ndarray) -> None:
    for j, name in enumerate(columns):
        col = x[:, j]
        on = col != 0
        if not np.all(np.isin(col[on], (1.0,))):
            continue  # only 0/1 dummies can separate this way
        if np.all(on):
            continue
        if y[on].sum() == 0:
            raise SeparationError(name)


def fit_glm_poisson(
    design: DesignMatrix,
    tol: float = 1e-9,
    max_iter: int = 100,
    estimator_tag: str = "ppml",
) -> FitResult:
    """Solve the Poisson score equations sum_i x_i (y_i - exp(x_i'b)) = 0.

    Iteratively reweighted least squares with step-halving whenever the
    pseudo-log-likelihood would decrease. Converged when both the score
    (scaled by the weighted column mass) and the relative coefficient
    change drop below ``tol``.
    """
    x, y = design.x, design.y
    if np.any(y < 0):
        raise ValueError("Poisson outcome must be non-negative")
    if not np.any(y > 0):
        raise ValueError("Poisson outcome has no positive values")
    _qr_rank_check(x, design.columns)
    _check_separation(x, design.columns, y)

    n, k = x.shape
    abs_x = np.abs(x)
    beta = np.zeros(k)
    if "intercept" in design.columns:
        beta[design.columns.index("intercept")] = math.log(float(y.mean()))

    trace: list[tuple[int, float, float]] = []
    step_norm = float("inf")
    converged = False
    iterations = 0
    for iteration in range(1, max_iter + 1):
        iterations = iteration
        eta = np.clip(x @ beta, _ETA_LOW, _ETA_HIGH)
        mu = np.exp(eta)
        loglik = _poisson_loglik(y, eta, mu)
        w = np.maximum(mu, 1e-290)
        z = eta + (y - mu) / w
        sqrt_w = np.sqrt(w)
        proposal, *_ = np.linalg.lstsq(x * sqrt_w[:, None], z * sqrt_w, rcond=None)
        delta = proposal - beta
        for _ in range(_MAX_HALVINGS):
            candidate = beta + delta
            eta_new = np.clip(x @ candidate, _ETA_LOW, _ETA_HIGH)
            mu_new = np.exp(eta_new)
            if _poisson_loglik(y, eta_new, mu_new) >= loglik - 1e-12 * (1.0 + abs(loglik)):
                break
            delta = delta / 2.0
        beta = beta + delta
        step_norm = float(np.max(np.abs(delta) / (1.0 + np.abs(beta))))

        eta = np.clip(x @ beta, _ETA_LOW, _ETA_HIGH)
        mu = np.exp(eta)
        score = x.T @ (y - mu)
        score_scale = 1.0 + abs_x.T @ mu
        rel_score = float(np.max(np.abs(score) / score_scale))
        trace.append((iteration, rel_score, step_norm))
        if rel_score < tol and step_norm < tol:
            converged = True
            break
        if not np.all(np.isfinite(beta)) or np.max(np.abs(beta)) > 1e4:
            # late-detected separation: a dummy whose weight mass underflowed
            for j, name in enumerate(design.columns):
                col = x[:, j]
                on = col != 0
                if np.all(np.isin(col[on], (1.0,))) and not np.all(on) and mu[on].sum() < 1e-280:
                    raise SeparationError(name)
            raise ConvergenceError("coefficients diverged during IRLS", trace)

    if not converged:
        raise ConvergenceError(
            f"IRLS did not converge in {max_iter} iterations "
            f"(last relative score {trace[-1][1]:.3e}, step {trace[-1][2]:.3e})",
            trace,
        )

    bread = _bread_from_weighted(x, mu)
    return FitResult(
        columns=list(design.columns),
        beta=beta,
        cov=bread.copy(),
        n_obs=n,
        estimator=estimator_tag,
        fe="none" if design.fe_info is None else design.fe_info.group,
        iterations=iterations,
        step_norm=step_norm,
        fitted=mu,
        residuals=y - mu,
        scores=x * (y - mu)[:, None],
        bread=bread,
    )


def add_fixed_effects(design: DesignMatrix, group: str = "destination") -> DesignMatrix:
    """Append per-group dummies for one cluster dimension.

    The first group in label order is the reference, absorbed by the
    intercept (created when absent). Regressors constant within every
    group are dropped as collinear with the dummies, and groups whose
    outcomes sum to zero are dropped whole: their effect has no finite
    maximiser.
    """
    if group == "destination":
        labels = design.cluster_dest
    elif group == "origin":
        labels = design.cluster_origin
    else:
        raise ValueError(f"unknown fixed-effect dimension {group!r}")

    labels = np.asarray([str(v) for v in labels])
    unique, inverse = np.unique(labels, return_inverse=True)
    y_sums = np.zeros(len(unique))
    np.add.at(y_sums, inverse, design.y)
    dead_groups = [unique[g] for g in range(len(unique)) if y_sums[g] == 0]
    if len(dead_groups) == len(unique):
        raise EstimationError("every group has an all-zero outcome; nothing to estimate")

    keep = ~np.isin(labels, dead_groups)
    dropped_rows = int((~keep).sum())
    x = design.x[keep]
    y = design.y[keep]
    labels = labels[keep]
    cluster_o = design.cluster_origin[keep]
    cluster_d = design.cluster_dest[keep]
    groups, inverse = np.unique(labels, return_inverse=True)

    kept_cols: list[int] = []
    dropped_columns: list[str] = []
    has_intercept = "intercept" in design.columns
    for j, name in enumerate(design.columns):
        if name == "intercept":
            kept_cols.append(j)
            continue
        col = x[:, j]
        group_constant = all(
            np.all(col[inverse == g] == col[inverse == g][0]) for g in range(len(groups))
        )
        if group_constant:
            dropped_columns.append(name)
        else:
            kept_cols.append(j)

    parts = [x[:, kept_cols]]
    names = [design.columns[j] for j in kept_cols]
    if not has_intercept:
        parts.insert(0, np.ones((len(y), 1)))
        names.insert(0, "intercept")

    reference = groups[0]
    dummies = np.zeros((len(y), len(groups) - 1))
    for g in range(1, len(groups)):
        dummies[inverse == g, g - 1] = 1.0
    if dummies.shape[1]:
        parts.append(dummies)
        names.extend(f"fe_{g}" for g in groups[1:])

    return DesignMatrix(
        x=np.column_stack(parts),
        columns=names,
        y=y,
        cluster_origin=cluster_o,
        cluster_dest=cluster_d,
        fe_info=FixedEffectsInfo(
            group=group,
            reference=str(reference),
            dropped_rows=dropped_rows,
            dropped_groups=[str(g) for g in dead_groups],
            dropped_columns=dropped_columns,
        ),
    )


def _cluster_meat(scores: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, int]:
    """Sum of outer products of within-cluster score sums."""
    _, inverse = np.unique(labels, return_inverse=True)
    n_groups = int(inverse.max()) + 1
    sums = np.zeros((n_groups, scores.shape[1]))
    np.add.at(sums, inverse, scores)
    return sums.T @ sums, n_groups


def _correction(n_groups: int, small_sample: bool, dimension: str) -> float:
    if n_groups < 2:
        warnings.warn(
            f"fewer than 2 clusters in the {dimension} dimension; its term is uncorrected",
            stacklevel=3,
        )
        return 1.0
    return n_groups / (n_groups - 1.0) if small_sample else 1.0


def sandwich_cov_twoway(
    bread: np.ndarray,
    scores: np.ndarray,
    cluster_a: np.ndarray,
    cluster_b: np.ndarray,
    small_sample: bool = True,
    psd_repair: bool = True,
) -> np.ndarray:
    """Two-way clustered sandwich covariance V_a + V_b - V_ab.

    ``scores`` holds per-observation score contributions (x_i times the
    residual), ``bread`` the inverse Hessian. Each term is a one-way
    clustered sandwich; the third clusters on the intersection cells.
    With ``small_sample`` each term is scaled by G/(G-1) for its own
    cluster count. The three-term difference can be indefinite, in which
    case negative eigenvalues are clamped to zero.
    """
    labels_a = np.asarray([str(v) for v in cluster_a])
    labels_b = np.asarray([str(v) for v in cluster_b])
    if len(labels_a) != len(scores) or len(labels_b) != len(scores):
        raise ValueError("cluster label lengths do not match score rows")

    meat_a, g_a = _cluster_meat(scores, labels_a)
    meat_b, g_b = _cluster_meat(scores, labels_b)
    _, ia = np.unique(labels_a, return_inverse=True)
    _, ib = np.unique(labels_b, return_inverse=True)
    pair = ia.astype(np.int64) * (int(ib.max()) + 1) + ib
    meat_ab, g_ab = _cluster_meat(scores, pair)

    meat = (
        _correction(g_a, small_sample, "first") * meat_a
        + _correction(g_b, small_sample, "second") * meat_b
        - _correction(g_ab, small_sample, "intersection") * meat_ab
    )
    cov = bread @ meat @ bread
    if not psd_repair:
        return cov
    cov = (cov + cov.T) / 2.0
    eigvals, eigvecs = np.linalg.eigh(cov)
    if eigvals[0] < 0:
        cov = (eigvecs * np.clip(eigvals, 0.0, None)) @ eigvecs.T
        cov = (cov + cov.T) / 2.0
    return cov


def with_twoway_cluster(
    fit: FitResult, design: DesignMatrix, small_sample: bool = True
) -> FitResult:
    """Return a copy of ``fit`` with origin/destination clustered covariance."""
    if fit.scores is None or fit.bread is None:
        raise ValueError("fit carries no score contributions; refit before clustering")
    cov = sandwich_cov_twoway(
        fit.bread, fit.scores, design.cluster_origin, design.cluster_dest, small_sample
    )
    return replace(fit, cov=cov)
