"""Panel estimators for the learning-speed regressions.

Four estimation routes over the derived panel, all with subject-level fixed
effects and subject clustering where applicable:

* conditional (within-subject) logit for the binary gain-direction outcome,
  with a pooled-logit fallback when the conditional fit does not converge;
* within-transformed OLS with CR1 cluster-robust covariance for the
  continuous gain-change outcome;
* a Huber M-estimator (iteratively reweighted least squares) variant of the
  within OLS, robust to the heavy-tailed gain changes;
* small helpers: Wald tests of linear combinations, the constant-gain slope
  regression, and the cross-experiment comparison of median errors.

Estimators are deterministic functions of their input panel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import stats

from .derive import SUBJECT_KEY

#: Coefficient magnitude beyond which a non-shrinking Newton step is treated
#: as complete separation.
SEPARATION_BOUND = 15.0


@dataclass(frozen=True)
class DesignSpec:
    """Outcome and error-form choice for one learning-speed regression.

    Regressor order is fixed as (main error term, correlation indicator,
    interaction).  ``error_form`` picks the continuous absolute error or the
    discrete small-error flag as the main term; ``outcome`` picks the binary
    gain direction or the raw gain change.
    """

    outcome: str      # "binary_y" | "delta_g"
    error_form: str   # "continuous" | "discrete"

    def __post_init__(self) -> None:
        if self.outcome not in ("binary_y", "delta_g"):
            raise ValueError(f"unknown outcome {self.outcome!r}")
        if self.error_form not in ("continuous", "discrete"):
            raise ValueError(f"unknown error_form {self.error_form!r}")

    @property
    def outcome_column(self) -> str:
        return "Y" if self.outcome == "binary_y" else "dG"

    @property
    def main_column(self) -> str:
        return "abs_e" if self.error_form == "continuous" else "SE"

    @property
    def names(self) -> tuple[str, str, str]:
        main = "E" if self.error_form == "continuous" else "SE"
        return (main, "R", f"{main}_x_R")


@dataclass
class LinearComboTest:
    """Wald test of a linear combination of coefficients."""

    estimate: float
    se: float
    p_value: float


@dataclass
class FitResult:
    """Coefficients, covariance, and diagnostics from one regression.

    ``params`` aligns with ``names``; inestimable coefficients are NaN and
    listed in ``dropped_params``.  ``p_override`` carries externally supplied
    p-values (used when replaying published coefficient tables whose rounded
    standard errors cannot reproduce the printed significance).
    """

    params: np.ndarray
    names: tuple[str, ...]
    cov: np.ndarray
    n_obs: int
    n_subjects: int
    estimator: str
    design: DesignSpec | None = None
    converged: bool = True
    dropped_subjects: int = 0
    dropped_params: tuple[str, ...] = ()
    score_inf_norm: float = math.nan
    notes: tuple[str, ...] = ()
    p_override: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def se(self) -> np.ndarray:
        # clip float dust so a -1e-18 diagonal does not turn into NaN
        return np.sqrt(np.maximum(np.diagonal(self.cov), 0.0))

    @property
    def p_values(self) -> np.ndarray:
        if self.p_override is not None:
            return self.p_override
        return np.array(
            [two_sided_p(b, s) for b, s in zip(self.params, self.se)]
        )

    def _index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"no coefficient named {name!r}") from None

    def coef(self, name: str) -> float:
        return float(self.params[self._index(name)])

    def se_of(self, name: str) -> float:
        return float(self.se[self._index(name)])

    def p_of(self, name: str) -> float:
        return float(self.p_values[self._index(name)])

    def triple_indices(self) -> tuple[int, int, int]:
        """Indices of (main, correlation, interaction) per the design order."""
        if self.design is None:
            raise ValueError("fit has no design; coefficient roles unknown")
        return tuple(self._index(n) for n in self.design.names)


def two_sided_p(estimate: float, se: float) -> float:
    """Two-sided p-value against the standard normal reference."""
    if math.isnan(estimate) or math.isnan(se):
        return math.nan
    if se == 0.0:
        return 1.0 if estimate == 0.0 else 0.0
    return float(2.0 * stats.norm.sf(abs(estimate) / se))


def check_psd(cov: np.ndarray, tol: float = -1e-10) -> float:
    """Smallest eigenvalue of a symmetric covariance; raises if below ``tol``."""
    finite = cov[np.ix_(~np.isnan(np.diagonal(cov)), ~np.isnan(np.diagonal(cov)))]
    if finite.size == 0:
        return math.nan
    min_eig = float(np.linalg.eigvalsh((finite + finite.T) / 2.0).min())
    if min_eig < tol:
        raise ValueError(f"covariance is not positive semidefinite (min eig {min_eig:g})")
    return min_eig


# ---------------------------------------------------------------------------
# design assembly


def build_design(
    derived: pd.DataFrame, spec: DesignSpec
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Extract (y, X, groups) for a learning-speed regression.

    Keeps rows where the outcome, the correlation indicator, and the main
    error term are all defined.  ``groups`` are integer subject codes in the
    panel's sort order.
    """
    cols = [spec.outcome_column, "R", spec.main_column]
    sub = derived.dropna(subset=cols)
    y = sub[spec.outcome_column].to_numpy(dtype=float)
    main = sub[spec.main_column].to_numpy(dtype=float)
    r = sub["R"].to_numpy(dtype=float)
    X = np.column_stack([main, r, main * r])
    key = sub[SUBJECT_KEY].astype(str).agg("|".join, axis=1)
    groups = pd.factorize(key, sort=True)[0]
    return y, X, groups


def _group_slices(groups: np.ndarray) -> list[np.ndarray]:
    order = np.argsort(groups, kind="stable")
    sorted_groups = groups[order]
    boundaries = np.flatnonzero(np.diff(sorted_groups)) + 1
    return np.split(order, boundaries)


# ---------------------------------------------------------------------------
# conditional (within-subject) logit


def _clogit_group_terms(
    x: np.ndarray, u: np.ndarray, k: int
) -> tuple[float, np.ndarray, np.ndarray]:
    """log, gradient, and Hessian of the sum over k-subsets of exp(sum u).

    Dynamic program over periods; subtracting max(u) from every term scales
    the k-subset sum by a known factor and keeps the recursion in range, with
    a second rescale guard for extreme spreads.
    """
    T, K = x.shape
    shift = float(u.max())
    a = np.exp(u - shift)
    f = np.zeros(k + 1)
    f[0] = 1.0
    grad = np.zeros((k + 1, K))
    hess = np.zeros((k + 1, K, K))
    log_scale = 0.0
    for t in range(T):
        at = a[t]
        xt = x[t]
        gx = grad[:-1] + f[:-1, None] * xt[None, :]
        hess[1:] += at * (
            hess[:-1]
            + grad[:-1, :, None] * xt[None, None, :]
            + xt[None, :, None] * grad[:-1, None, :]
            + f[:-1, None, None] * np.outer(xt, xt)[None, :, :]
        )
        grad[1:] += at * gx
        f[1:] += at * f[:-1]
        peak = f.max()
        if peak > 1e250:
            f /= peak
            grad /= peak
            hess /= peak
            log_scale += math.log(peak)
    fk = f[k]
    if fk <= 0.0 or not math.isfinite(fk):
        raise FloatingPointError("conditional likelihood denominator underflowed")
    log_den = math.log(fk) + log_scale + k * shift
    dlog = grad[k] / fk
    d2log = hess[k] / fk - np.outer(dlog, dlog)
    return log_den, dlog, d2log


def _clogit_objective(
    beta: np.ndarray, groups_data: list[tuple[np.ndarray, np.ndarray, int]]
) -> tuple[float, np.ndarray, np.ndarray]:
    K = beta.size
    loglik = 0.0
    score = np.zeros(K)
    info = np.zeros((K, K))
    for x, y, k in groups_data:
        u = x @ beta
        log_den, dlog, d2log = _clogit_group_terms(x, u, k)
        loglik += float(y @ u) - log_den
        score += y @ x - dlog
        info += d2log
    return loglik, score, info


def _newton_mle(
    objective,
    beta0: np.ndarray,
    *,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, bool, bool, int]:
    """Maximize a log-likelihood by damped Newton steps.

    ``objective(beta)`` returns (loglik, score, information) with information
    positive semidefinite.  Returns (beta, score, information, converged,
    separation_flag, iterations).  Separation is flagged when a coefficient
    runs past SEPARATION_BOUND while the step is not shrinking.
    """
    beta = beta0.astype(float).copy()
    loglik, score, info = objective(beta)
    converged = False
    separation = False
    prev_step_norm = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        if float(np.max(np.abs(score))) < tol:
            converged = True
            break
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(info, score, rcond=None)[0]
        step_norm = float(np.max(np.abs(step)))
        scale = 1.0
        for _ in range(30):
            candidate = beta + scale * step
            try:
                new_loglik, new_score, new_info = objective(candidate)
            except FloatingPointError:
                scale *= 0.5
                continue
            if new_loglik >= loglik - 1e-12:
                break
            scale *= 0.5
        else:
            break
        beta, loglik, score, info = candidate, new_loglik, new_score, new_info
        if float(np.max(np.abs(beta))) > SEPARATION_BOUND and step_norm >= prev_step_norm * 0.5:
            separation = True
            break
        prev_step_norm = step_norm
    else:
        it = max_iter
    if not converged and float(np.max(np.abs(score))) < tol:
        converged = True
    return beta, score, info, converged, separation, it


def conditional_logit(
    y: np.ndarray,
    X: np.ndarray,
    groups: np.ndarray,
    *,
    names: tuple[str, ...],
    tol: float = 1e-8,
    max_iter: int = 100,
) -> FitResult:
    """Within-subject logit via the conditional likelihood.

    Subject intercepts are eliminated by conditioning on each subject's
    outcome total; subjects with all-0 or all-1 outcomes carry no information
    and are dropped (counted in ``dropped_subjects``).  Regressors with no
    within-subject variation anywhere are inestimable and reported NaN.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    K = X.shape[1]

    groups_data = []
    dropped = 0
    n_obs = 0
    any_variation = np.zeros(K, dtype=bool)
    for idx in _group_slices(groups):
        yg = y[idx]
        k = int(round(yg.sum()))
        if k == 0 or k == len(idx):
            dropped += 1
            continue
        xg = X[idx]
        centered = xg - xg.mean(axis=0)
        any_variation |= np.abs(centered).max(axis=0) > 0.0
        groups_data.append((centered, yg, k))
        n_obs += len(idx)

    if not groups_data:
        raise ValueError("no subject has outcome variation; nothing to fit")

    keep = np.flatnonzero(any_variation)
    dropped_params = tuple(names[j] for j in range(K) if j not in keep)
    reduced = [(x[:, keep], yg, k) for x, yg, k in groups_data]

    beta_r, score_r, info_r, converged, separation, iters = _newton_mle(
        lambda b: _clogit_objective(b, reduced),
        np.zeros(keep.size),
        tol=tol,
        max_iter=max_iter,
    )

    params = np.full(K, np.nan)
    params[keep] = beta_r
    cov = np.full((K, K), np.nan)
    try:
        cov_r = np.linalg.inv(info_r)
    except np.linalg.LinAlgError:
        cov_r = np.linalg.pinv(info_r)
    cov[np.ix_(keep, keep)] = cov_r

    notes = []
    if separation:
        notes.append("possible complete separation; estimates unreliable")
        converged = False
    if not converged and not separation:
        notes.append(f"Newton did not converge in {iters} iterations")
    return FitResult(
        params=params,
        names=names,
        cov=cov,
        n_obs=n_obs,
        n_subjects=len(groups_data),
        estimator="cond_logit",
        converged=converged,
        dropped_subjects=dropped,
        dropped_params=dropped_params,
        score_inf_norm=float(np.max(np.abs(score_r))),
        notes=tuple(notes),
    )


def _pooled_logit_objective(beta, X, y):
    from scipy.special import expit

    u = X @ beta
    p = expit(u)
    loglik = float(np.sum(y * u - np.logaddexp(0.0, u)))
    resid = y - p
    score = X.T @ resid
    w = p * (1.0 - p)
    info = X.T @ (X * w[:, None])
    return loglik, score, info


def pooled_logit(
    y: np.ndarray,
    X: np.ndarray,
    groups: np.ndarray | None,
    *,
    names: tuple[str, ...],
    tol: float = 1e-8,
    max_iter: int = 100,
    estimator: str = "pooled_logit",
) -> FitResult:
    """Plain logit; cluster-robust sandwich covariance when ``groups`` given."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    beta, score, info, converged, separation, iters = _newton_mle(
        lambda b: _pooled_logit_objective(b, X, y),
        np.zeros(X.shape[1]),
        tol=tol,
        max_iter=max_iter,
    )
    bread = np.linalg.inv(info)
    if groups is None:
        cov = bread
        n_subjects = len(y)
    else:
        from scipy.special import expit

        slices = _group_slices(groups)
        m = len(slices)
        resid = y - expit(X @ beta)
        meat = np.zeros_like(info)
        for idx in slices:
            sg = X[idx].T @ resid[idx]
            meat += np.outer(sg, sg)
        cov = bread @ meat @ bread * (m / (m - 1.0))
        n_subjects = m
    notes = []
    if separation:
        notes.append("possible complete separation; estimates unreliable")
        converged = False
    if not converged and not separation:
        notes.append(f"Newton did not converge in {iters} iterations")
    return FitResult(
        params=beta,
        names=names,
        cov=cov,
        n_obs=len(y),
        n_subjects=n_subjects,
        estimator=estimator,
        converged=converged,
        score_inf_norm=float(np.max(np.abs(score))),
        notes=tuple(notes),
    )


def fit_fe_logit(derived: pd.DataFrame, spec: DesignSpec, **kwargs) -> FitResult:
    """Fixed-effect logit of the gain-direction outcome (conditional form)."""
    if spec.outcome != "binary_y":
        raise ValueError("fit_fe_logit requires the binary_y outcome")
    y, X, groups = build_design(derived, spec)
    fit = conditional_logit(y, X, groups, names=spec.names, **kwargs)
    fit.design = spec
    return fit


def fit_re_fallback(derived: pd.DataFrame, spec: DesignSpec, **kwargs) -> FitResult:
    """Pooled logit with subject-clustered errors; fallback for a non-converged FE fit."""
    if spec.outcome != "binary_y":
        raise ValueError("fit_re_fallback requires the binary_y outcome")
    y, X, groups = build_design(derived, spec)
    Xc = np.column_stack([X, np.ones(len(y))])
    fit = pooled_logit(
        y,
        Xc,
        groups,
        names=spec.names + ("const",),
        estimator="pooled_logit_fallback",
        **kwargs,
    )
    fit.design = spec
    return fit


# ---------------------------------------------------------------------------
# within OLS and the Huber variant


def demean_by_group(values: np.ndarray, groups: np.ndarray) -> np.ndarray:
    """Subtract the group mean from each row (the within transformation)."""
    values = np.asarray(values, dtype=float)
    out = values.copy()
    for idx in _group_slices(groups):
        out[idx] = values[idx] - values[idx].mean(axis=0)
    return out


def cr1_covariance(
    X: np.ndarray, resid: np.ndarray, groups: np.ndarray, n_params: int
) -> np.ndarray:
    """CR1 cluster sandwich: small-sample factor (M/(M-1)) * ((N-1)/(N-K))."""
    bread = np.linalg.inv(X.T @ X)
    slices = _group_slices(groups)
    m = len(slices)
    if m < 2:
        raise ValueError("cluster-robust covariance needs at least 2 subjects")
    n = len(resid)
    meat = np.zeros((X.shape[1], X.shape[1]))
    for idx in slices:
        sg = X[idx].T @ resid[idx]
        meat += np.outer(sg, sg)
    factor = (m / (m - 1.0)) * ((n - 1.0) / (n - n_params))
    return factor * bread @ meat @ bread


def within_ols(
    y: np.ndarray,
    X: np.ndarray,
    groups: np.ndarray,
    *,
    names: tuple[str, ...],
    estimator: str = "within_ols",
) -> FitResult:
    """Subject-demeaned OLS with CR1 cluster-robust covariance.

    Columns with no within-subject variation are rank deficient after
    demeaning and come back NaN.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    K = X.shape[1]
    yd = demean_by_group(y, groups)
    Xd = demean_by_group(X, groups)

    keep = np.flatnonzero(np.abs(Xd).max(axis=0) > 1e-12)
    dropped_params = tuple(names[j] for j in range(K) if j not in keep)
    if keep.size == 0:
        raise ValueError("no regressor varies within subjects; nothing to fit")
    Xk = Xd[:, keep]
    beta_k, *_ = np.linalg.lstsq(Xk, yd, rcond=None)
    resid = yd - Xk @ beta_k
    cov_k = cr1_covariance(Xk, resid, groups, n_params=keep.size)

    params = np.full(K, np.nan)
    params[keep] = beta_k
    cov = np.full((K, K), np.nan)
    cov[np.ix_(keep, keep)] = cov_k
    return FitResult(
        params=params,
        names=names,
        cov=cov,
        n_obs=len(y),
        n_subjects=len(_group_slices(groups)),
        estimator=estimator,
        dropped_params=dropped_params,
        score_inf_norm=float(np.max(np.abs(Xk.T @ resid))) if keep.size else 0.0,
    )


def fit_fe_ols_cluster(derived: pd.DataFrame, spec: DesignSpec) -> FitResult:
    """Within-subject OLS of the gain change with clustered standard errors."""
    if spec.outcome != "delta_g":
        raise ValueError("fit_fe_ols_cluster requires the delta_g outcome")
    y, X, groups = build_design(derived, spec)
    fit = within_ols(y, X, groups, names=spec.names)
    fit.design = spec
    return fit


def mad_scale(resid: np.ndarray) -> float:
    """Median absolute deviation normalized to the Gaussian scale."""
    return float(np.median(np.abs(resid))) / 0.6744897501960817


def huber_irls(
    y: np.ndarray,
    X: np.ndarray,
    *,
    tuning: float = 1.345,
    tol: float = 1e-8,
    max_iter: int = 200,
) -> tuple[np.ndarray, np.ndarray, bool, int]:
    """Huber M-estimation by iteratively reweighted least squares.

    The residual scale is the normalized median absolute deviation,
    re-estimated every iteration.  Returns (beta, weights, converged,
    iterations); the returned beta solves the weighted least squares at the
    returned weights exactly.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    weights = np.ones(len(y))
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        resid = y - X @ beta
        scale = mad_scale(resid)
        if scale <= 1e-12:
            weights = np.ones(len(y))
            converged = True
            break
        z = np.abs(resid) / scale
        weights = np.where(z <= tuning, 1.0, tuning / z)
        Xw = X * weights[:, None]
        new_beta = np.linalg.solve(X.T @ Xw, Xw.T @ y)
        if float(np.max(np.abs(new_beta - beta))) < tol:
            beta = new_beta
            converged = True
            break
        beta = new_beta
    return beta, weights, converged, it


def fit_fe_huber(
    derived: pd.DataFrame, spec: DesignSpec, tuning: float = 1.345
) -> FitResult:
    """Huber M-estimator on the within-transformed gain-change regression.

    Cluster-robust covariance is computed on the final weighted problem.
    """
    if spec.outcome != "delta_g":
        raise ValueError("fit_fe_huber requires the delta_g outcome")
    y, X, groups = build_design(derived, spec)
    K = X.shape[1]
    yd = demean_by_group(y, groups)
    Xd = demean_by_group(X, groups)
    keep = np.flatnonzero(np.abs(Xd).max(axis=0) > 1e-12)
    dropped_params = tuple(spec.names[j] for j in range(K) if j not in keep)
    if keep.size == 0:
        raise ValueError("no regressor varies within subjects; nothing to fit")
    Xk = Xd[:, keep]

    beta_k, weights, converged, iters = huber_irls(yd, Xk, tuning=tuning)
    sw = np.sqrt(weights)
    Xw = Xk * sw[:, None]
    uw = sw * (yd - Xk @ beta_k)
    cov_k = cr1_covariance(Xw, uw, groups, n_params=keep.size)

    params = np.full(K, np.nan)
    params[keep] = beta_k
    cov = np.full((K, K), np.nan)
    cov[np.ix_(keep, keep)] = cov_k
    notes = () if converged else (f"IRLS did not converge in {iters} iterations",)
    return FitResult(
        params=params,
        names=spec.names,
        cov=cov,
        n_obs=len(y),
        n_subjects=len(_group_slices(groups)),
        estimator="huber_m",
        design=spec,
        converged=converged,
        dropped_params=dropped_params,
        score_inf_norm=float(np.max(np.abs(Xw.T @ uw))) if keep.size else 0.0,
        notes=notes,
        extra={"tuning": tuning, "irls_iterations": iters},
    )


# ---------------------------------------------------------------------------
# linear combinations, constant-gain slope, threshold comparison


def wald_linear_combo(fit: FitResult, weights) -> LinearComboTest:
    """Wald test of a weighted sum of the (main, correlation, interaction) triple."""
    w = np.asarray(weights, dtype=float)
    if w.size != 3:
        raise ValueError("weights must have length 3")
    idx = list(fit.triple_indices())
    theta = fit.params[idx]
    sigma = fit.cov[np.ix_(idx, idx)]
    if np.isnan(theta[w != 0.0]).any():
        raise ValueError("linear combination involves an inestimable coefficient")
    check_psd(sigma)
    estimate = float(w @ theta)
    se = float(math.sqrt(max(w @ sigma @ w, 0.0)))
    return LinearComboTest(estimate=estimate, se=se, p_value=two_sided_p(estimate, se))


def estimate_ada_slope(derived: pd.DataFrame) -> FitResult:
    """Within-subject OLS of the forecast revision on the lagged error.

    A constant-gain learner has slope equal to its gain; the fit carries
    ``extra['ci_in_unit_interval']`` flagging whether the 95% confidence
    interval lies strictly inside (0, 1).
    """
    df = derived.sort_values(SUBJECT_KEY + ["period"], kind="mergesort")
    rows_y = []
    rows_x = []
    rows_g = []
    for gid, (_, g) in enumerate(df.groupby(SUBJECT_KEY, sort=True)):
        periods = g["period"].to_numpy()
        f = g["forecast"].to_numpy(dtype=float)
        p = g["price"].to_numpy(dtype=float)
        adjacent = np.diff(periods) == 1
        rev = (f[1:] - f[:-1])[adjacent]
        lag_err = (p[:-1] - f[:-1])[adjacent]
        rows_y.append(rev)
        rows_x.append(lag_err)
        rows_g.append(np.full(len(rev), gid))
    y = np.concatenate(rows_y)
    x = np.concatenate(rows_x)
    groups = np.concatenate(rows_g)
    if len(y) < 2:
        raise ValueError("need at least 2 (revision, lagged error) pairs")

    yd = demean_by_group(y, groups)
    xd = demean_by_group(x, groups)
    sxx = float(xd @ xd)
    if sxx <= 1e-12:
        return FitResult(
            params=np.array([0.0]),
            names=("gain",),
            cov=np.array([[math.nan]]),
            n_obs=len(y),
            n_subjects=int(groups.max()) + 1,
            estimator="within_ols",
            converged=True,
            notes=("no variation in the lagged error; slope degenerate",),
            score_inf_norm=0.0,
            extra={"ci_in_unit_interval": False},
        )
    beta = float(xd @ yd) / sxx
    resid = yd - beta * xd
    X1 = xd[:, None]
    cov = cr1_covariance(X1, resid, groups, n_params=1)
    se = float(math.sqrt(cov[0, 0]))
    z = stats.norm.ppf(0.975)
    lo, hi = beta - z * se, beta + z * se
    return FitResult(
        params=np.array([beta]),
        names=("gain",),
        cov=cov,
        n_obs=len(y),
        n_subjects=int(groups.max()) + 1,
        estimator="within_ols",
        converged=True,
        score_inf_norm=float(np.max(np.abs(X1.T @ resid))),
        extra={"ci_in_unit_interval": bool(0.0 < lo and hi < 1.0), "ci": (lo, hi)},
    )


def subject_median_table(derived: pd.DataFrame) -> pd.DataFrame:
    """Per-(experiment, subject) median absolute error, one row each.

    The subject key nests treatment and market so identically named subjects
    in different markets stay distinct.
    """
    key = derived[SUBJECT_KEY].astype(str).agg("|".join, axis=1)
    table = (
        derived.assign(subject=key)
        .groupby(["experiment", "subject"], sort=True)["abs_e"]
        .median()
        .reset_index()
    )
    table.columns = ["experiment", "subject_id", "median_abs_e"]
    return table


def compare_thresholds(
    medians: pd.DataFrame, base: str
) -> FitResult:
    """OLS of subject-level median absolute error on experiment indicators.

    ``medians`` needs columns (experiment, subject_id, median_abs_e); the
    base experiment becomes the intercept.  Heteroskedasticity-robust (HC1)
    standard errors.
    """
    experiments = sorted(medians["experiment"].unique())
    if len(experiments) < 2:
        raise ValueError("need at least 2 experiments to compare thresholds")
    if base not in experiments:
        raise ValueError(f"base experiment {base!r} not present")
    counts = medians.groupby("experiment")["median_abs_e"].count()
    if (counts < 2).any():
        small = counts[counts < 2].index.tolist()
        raise ValueError(f"experiments with fewer than 2 subjects: {small}")
    others = [e for e in experiments if e != base]
    y = medians["median_abs_e"].to_numpy(dtype=float)
    X = np.column_stack(
        [np.ones(len(y))]
        + [(medians["experiment"] == e).to_numpy(dtype=float) for e in others]
    )
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    bread = np.linalg.inv(X.T @ X)
    meat = X.T @ (X * (resid**2)[:, None])
    n, k = X.shape
    cov = bread @ meat @ bread * (n / (n - k))
    return FitResult(
        params=beta,
        names=("const",) + tuple(others),
        cov=cov,
        n_obs=n,
        n_subjects=n,
        estimator="ols_hc1",
        converged=True,
        score_inf_norm=float(np.max(np.abs(X.T @ resid))),
    )
