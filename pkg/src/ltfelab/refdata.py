"""Bundled reference coefficient tables and replay classification.

The package ships the previously reported estimates for the 18 market
experiments (binary learning-speed logits and the robust-regression
variants) as coefficient CSVs so the classifier can be exercised without the
original subject-level data.  Published standard errors are rounded, so each
coefficient also carries its printed significance code (star count); replay
derives significance from those codes rather than recomputing p-values that
the rounding cannot support.
"""

from __future__ import annotations

import math
from importlib import resources

import numpy as np
import pandas as pd

from .classify import Classification, classify_continuous, classify_discrete
from .econometrics import DesignSpec, FitResult, LinearComboTest

#: Representative p-values per printed significance code; only their position
#: relative to the 0.01 / 0.05 / 0.10 brackets matters.
STARS_TO_P = {3: 0.001, 2: 0.03, 1: 0.07, 0: 0.5}

REPLAY_COLUMNS = [
    "analysis", "feedback", "model", "experiment", "panel", "n_obs", "n_subjects",
    "delta", "delta_se", "delta_stars", "gamma", "gamma_se", "gamma_stars",
    "beta", "beta_se", "beta_stars", "combo", "combo_se", "combo_stars",
    "median_abs_e", "published_class",
]


def load_reference_table(which: str = "binary") -> pd.DataFrame:
    """Load a bundled coefficient table: ``binary`` or ``huber``."""
    name = {
        "binary": "reference_binary_speed.csv",
        "huber": "reference_huber_speed.csv",
    }[which]
    with resources.files("ltfelab.data").joinpath(name).open("rb") as fh:
        return pd.read_csv(fh)


def _stars_to_p(stars) -> float:
    if stars is None or (isinstance(stars, float) and math.isnan(stars)):
        return math.nan
    return STARS_TO_P[int(stars)]


def fit_from_table_row(row: pd.Series) -> FitResult:
    """Rebuild a coefficient triple as a FitResult from one table row.

    The covariance is diagonal in the printed standard errors (the printed
    tables carry no cross terms), and p-values come from the printed
    significance codes via ``p_override``.
    """
    error_form = "continuous" if row["panel"] == "continuous" else "discrete"
    spec = DesignSpec(
        outcome="binary_y" if row["analysis"] == "binary" else "delta_g",
        error_form=error_form,
    )
    main, r, inter = spec.names
    params = np.array([row["beta"], row["gamma"], row["delta"]], dtype=float)
    ses = np.array([row["beta_se"], row["gamma_se"], row["delta_se"]], dtype=float)
    p = np.array(
        [
            _stars_to_p(row["beta_stars"]),
            _stars_to_p(row["gamma_stars"]),
            _stars_to_p(row["delta_stars"]),
        ]
    )
    return FitResult(
        params=params,
        names=(main, r, inter),
        cov=np.diag(ses**2),
        n_obs=int(row["n_obs"]),
        n_subjects=int(row["n_subjects"]),
        estimator="published_table",
        design=spec,
        converged=True,
        p_override=p,
    )


def combo_from_table_row(row: pd.Series) -> LinearComboTest:
    """Wald test of gamma + delta as printed; NaN when the table has no combo row."""
    est = row.get("combo", math.nan)
    if est is None or (isinstance(est, float) and math.isnan(est)):
        return LinearComboTest(math.nan, math.nan, math.nan)
    return LinearComboTest(
        estimate=float(est),
        se=float(row["combo_se"]),
        p_value=_stars_to_p(row["combo_stars"]),
    )


def replay_classifications(
    table: pd.DataFrame, alpha: float = 0.05
) -> list[Classification]:
    """Classify every row of a published coefficient table.

    The constant-gain slope check is unavailable in replay (the tables never
    report it), so the ADA verdict cannot arise here.
    """
    missing = [c for c in REPLAY_COLUMNS if c not in table.columns]
    if missing:
        raise ValueError(f"replay table is missing columns: {missing}")
    out = []
    for _, row in table.iterrows():
        fit = fit_from_table_row(row)
        variant_family = "binary" if row["analysis"] == "binary" else "huber"
        variant = f"{variant_family}-{row['panel']}"
        if row["panel"] == "continuous":
            cls = classify_continuous(
                fit, ada_slope_ok=False, alpha=alpha,
                experiment=str(row["experiment"]), variant=variant,
            )
        else:
            cls = classify_discrete(
                fit, ada_slope_ok=False, alpha=alpha,
                combo=combo_from_table_row(row),
                experiment=str(row["experiment"]), variant=variant,
            )
        out.append(cls)
    return out
