"""Rule classification from fitted learning-speed regressions.

The hypothesis system maps the interaction and correlation coefficients of a
fitted learning-speed regression to a verdict: satisficing gain adaptation
(RMBL), always-on gain adaptation (IDBD), a constant gain (ADA), or
Unclassified.  The discrete variant additionally locates the satisficing
threshold relative to the subject-level median error through the Wald test
of gamma + delta.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import pandas as pd

from .derive import SUBJECT_KEY
from .econometrics import (
    DesignSpec,
    FitResult,
    LinearComboTest,
    conditional_logit,
    fit_fe_huber,
    fit_fe_logit,
    fit_fe_ols_cluster,
    fit_re_fallback,
    wald_linear_combo,
    within_ols,
)

VERDICT_RMBL = "RMBL"
VERDICT_IDBD = "IDBD"
VERDICT_ADA = "ADA"
VERDICT_NONE = "Unclassified"

Z_AT_MEDIAN = "at-median"
Z_BELOW_MEDIAN = "below-median"
Z_NA = "n/a"

#: Analysis variants: estimator family x error form.
VARIANTS = (
    "binary-continuous",
    "binary-discrete",
    "ols-continuous",
    "ols-discrete",
    "huber-continuous",
    "huber-discrete",
)


@dataclass(frozen=True)
class Classification:
    """Verdict for one (experiment, analysis variant)."""

    experiment: str
    variant: str
    verdict: str
    z_location: str
    reason: str
    alpha: float
    fit: FitResult
    combo: LinearComboTest | None = None


def _coef_p(fit: FitResult, role: int) -> tuple[float, float]:
    idx = fit.triple_indices()[role]
    return float(fit.params[idx]), float(fit.p_values[idx])


def _sig_pos(est: float, p: float, alpha: float) -> bool:
    return est > 0.0 and p < alpha


def _sig_neg(est: float, p: float, alpha: float) -> bool:
    return est < 0.0 and p < alpha


def classify_continuous(
    fit: FitResult,
    ada_slope_ok: bool,
    alpha: float = 0.05,
    *,
    experiment: str = "",
    variant: str = "binary-continuous",
) -> Classification:
    """Verdict from a continuous-error fit.

    Precedence: RMBL when the interaction is significantly positive and the
    correlation coefficient is not significantly negative; IDBD when the
    interaction is insignificant and the correlation significantly positive;
    ADA when both are insignificant and the constant-gain slope condition
    holds; otherwise Unclassified.
    """
    common = dict(experiment=experiment, variant=variant, alpha=alpha, fit=fit)
    if not fit.converged:
        return Classification(
            verdict=VERDICT_NONE, z_location=Z_NA,
            reason="estimator did not converge", **common,
        )
    delta, p_d = _coef_p(fit, 2)
    gamma, p_g = _coef_p(fit, 1)
    if _sig_pos(delta, p_d, alpha) and not _sig_neg(gamma, p_g, alpha):
        reason = "interaction significantly positive, correlation not significantly negative"
        return Classification(verdict=VERDICT_RMBL, z_location=Z_NA, reason=reason, **common)
    if p_d >= alpha and _sig_pos(gamma, p_g, alpha):
        reason = "interaction insignificant, correlation significantly positive"
        return Classification(verdict=VERDICT_IDBD, z_location=Z_NA, reason=reason, **common)
    if p_d >= alpha and p_g >= alpha and ada_slope_ok:
        reason = "both coefficients insignificant, constant-gain slope inside (0, 1)"
        return Classification(verdict=VERDICT_ADA, z_location=Z_NA, reason=reason, **common)
    return Classification(
        verdict=VERDICT_NONE, z_location=Z_NA,
        reason="coefficient pattern matches no hypothesis", **common,
    )


def classify_discrete(
    fit: FitResult,
    ada_slope_ok: bool,
    alpha: float = 0.05,
    *,
    combo: LinearComboTest | None = None,
    experiment: str = "",
    variant: str = "binary-discrete",
) -> Classification:
    """Verdict from a discrete (small-error flag) fit.

    RMBL needs a significantly negative interaction and significantly
    positive correlation coefficient; the threshold then sits at the median
    when gamma + delta is insignificant and below it when significantly
    positive.  ``combo`` overrides the internally computed Wald test (used
    when replaying published tables, whose covariance is not available).
    """
    common = dict(experiment=experiment, variant=variant, alpha=alpha, fit=fit)
    if not fit.converged:
        return Classification(
            verdict=VERDICT_NONE, z_location=Z_NA,
            reason="estimator did not converge", combo=combo, **common,
        )
    delta, p_d = _coef_p(fit, 2)
    gamma, p_g = _coef_p(fit, 1)
    if _sig_neg(delta, p_d, alpha) and _sig_pos(gamma, p_g, alpha):
        if combo is None:
            combo = wald_linear_combo(fit, (0.0, 1.0, 1.0))
        if combo.p_value >= alpha:
            z_loc = Z_AT_MEDIAN
        elif combo.estimate > 0.0:
            z_loc = Z_BELOW_MEDIAN
        else:
            z_loc = Z_NA  # significantly negative sum matches no hypothesis row
        reason = "interaction significantly negative, correlation significantly positive"
        return Classification(verdict=VERDICT_RMBL, z_location=z_loc, reason=reason, combo=combo, **common)
    if p_d >= alpha and _sig_pos(gamma, p_g, alpha):
        reason = "interaction insignificant, correlation significantly positive"
        return Classification(verdict=VERDICT_IDBD, z_location=Z_NA, reason=reason, combo=combo, **common)
    if p_d >= alpha and p_g >= alpha and ada_slope_ok:
        reason = "both coefficients insignificant, constant-gain slope inside (0, 1)"
        return Classification(verdict=VERDICT_ADA, z_location=Z_NA, reason=reason, combo=combo, **common)
    return Classification(
        verdict=VERDICT_NONE, z_location=Z_NA,
        reason="coefficient pattern matches no hypothesis", combo=combo, **common,
    )


def classify_fit(
    fit: FitResult,
    ada_slope_ok: bool,
    alpha: float,
    *,
    experiment: str,
    variant: str,
    combo: LinearComboTest | None = None,
) -> Classification:
    """Dispatch on the fit's error form."""
    if fit.design is None:
        raise ValueError("fit has no design; cannot pick a hypothesis column")
    if fit.design.error_form == "continuous":
        return classify_continuous(
            fit, ada_slope_ok, alpha, experiment=experiment, variant=variant
        )
    return classify_discrete(
        fit, ada_slope_ok, alpha, combo=combo, experiment=experiment, variant=variant
    )


def fit_variant(derived: pd.DataFrame, variant: str, huber_tuning: float = 1.345) -> FitResult:
    """Run the estimator behind one analysis variant."""
    family, error_form = variant.rsplit("-", maxsplit=1)
    if family == "binary":
        spec = DesignSpec(outcome="binary_y", error_form=error_form)
        fit = fit_fe_logit(derived, spec)
        if not fit.converged:
            fit = fit_re_fallback(derived, spec)
        return fit
    spec = DesignSpec(outcome="delta_g", error_form=error_form)
    if family == "ols":
        return fit_fe_ols_cluster(derived, spec)
    if family == "huber":
        return fit_fe_huber(derived, spec, tuning=huber_tuning)
    raise ValueError(f"unknown analysis variant {variant!r}")


def split_sample_coefficients(
    derived: pd.DataFrame, estimator: str = "binary"
) -> pd.DataFrame:
    """Correlation-only coefficient within each median-error split.

    Splits each experiment's rows by the small-error flag and regresses the
    outcome on the correlation indicator alone (subject fixed effects kept):
    the plot-ready rows behind the split-sample figures.  ``estimator`` picks
    the outcome family: ``binary`` (gain direction, conditional logit),
    ``ols`` or ``huber`` (gain change).
    """
    if estimator not in ("binary", "ols", "huber"):
        raise ValueError(f"unknown estimator {estimator!r}")
    outcome = "Y" if estimator == "binary" else "dG"
    records = []
    for experiment, exp_rows in derived.groupby("experiment", sort=True):
        for split_name, flag in (("below", 1.0), ("at-or-above", 0.0)):
            rows = exp_rows[exp_rows["SE"] == flag].dropna(subset=[outcome, "R"])
            if rows.empty:
                warnings.warn(
                    f"{experiment}: no usable rows in the {split_name!r} split; row omitted",
                    stacklevel=2,
                )
                continue
            y = rows[outcome].to_numpy(dtype=float)
            X = rows[["R"]].to_numpy(dtype=float)
            key = rows[SUBJECT_KEY].astype(str).agg("|".join, axis=1)
            groups = pd.factorize(key, sort=True)[0]
            try:
                if estimator == "binary":
                    fit = conditional_logit(y, X, groups, names=("R",))
                elif estimator == "ols":
                    fit = within_ols(y, X, groups, names=("R",))
                else:
                    from .econometrics import demean_by_group, huber_irls, cr1_covariance
                    import numpy as np

                    yd = demean_by_group(y, groups)
                    Xd = demean_by_group(X, groups)
                    beta, w, converged, _ = huber_irls(yd, Xd)
                    sw = np.sqrt(w)
                    cov = cr1_covariance(Xd * sw[:, None], sw * (yd - Xd @ beta), groups, 1)
                    fit = FitResult(
                        params=beta, names=("R",), cov=cov, n_obs=len(y),
                        n_subjects=int(groups.max()) + 1, estimator="huber_m",
                        converged=converged,
                    )
            except (ValueError, FloatingPointError):
                continue
            records.append(
                {
                    "experiment": experiment,
                    "split": split_name,
                    "estimator": estimator,
                    "coef_r": fit.coef("R"),
                    "se_r": fit.se_of("R"),
                    "p_r": fit.p_of("R"),
                    "mean_abs_e": float(rows["abs_e"].mean()),
                    "n_obs": fit.n_obs,
                    "n_subjects": fit.n_subjects,
                }
            )
    return pd.DataFrame.from_records(
        records,
        columns=[
            "experiment", "split", "estimator", "coef_r", "se_r", "p_r",
            "mean_abs_e", "n_obs", "n_subjects",
        ],
    )
