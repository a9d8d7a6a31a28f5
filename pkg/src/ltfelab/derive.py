"""Derivation of regression variables from a forecast/price panel.

From raw (subject, period, forecast, price) rows this computes, per subject:
the prediction error ``e`` and its absolute value ``abs_e``, the revealed
gain ``G`` (forecast revision over lagged error), the gain change ``dG``, the
direction indicator ``Y`` (1 if the gain rose, 0 if it fell), the error
autocorrelation indicator ``R`` (sign of the product of two consecutive
errors), and the small-error flag ``SE`` (below the subject's median absolute
error).  Missing values are NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

#: Tolerance below which the gain denominator counts as zero.
GAIN_DENOM_TOL = 1e-9

PANEL_COLUMNS = [
    "experiment",
    "treatment",
    "market_id",
    "subject_id",
    "period",
    "forecast",
    "price",
]
DERIVED_COLUMNS = PANEL_COLUMNS + ["e", "abs_e", "G", "dG", "Y", "R", "SE"]
SUBJECT_KEY = ["experiment", "treatment", "market_id", "subject_id"]


@dataclass(frozen=True)
class PanelObservation:
    """One raw panel row: a subject's forecast and the realized price."""

    experiment: str
    treatment: str
    market_id: str
    subject_id: str
    period: int
    forecast: float
    price: float


def panel_frame(observations) -> pd.DataFrame:
    """Build a panel DataFrame from PanelObservation rows."""
    return pd.DataFrame([vars(o) for o in observations], columns=PANEL_COLUMNS)


def gain(forecast_t: float, forecast_tm1: float, price_tm1: float) -> float:
    """Revealed gain: forecast revision over the lagged prediction error.

    NaN when the denominator ``price_tm1 - forecast_tm1`` is within
    ``GAIN_DENOM_TOL`` of zero.
    """
    den = price_tm1 - forecast_tm1
    if abs(den) < GAIN_DENOM_TOL:
        return math.nan
    return (forecast_t - forecast_tm1) / den


def y_indicator(delta_gain: float) -> float:
    """1 for a gain increase, 0 for a decrease, NaN for missing or zero change."""
    if delta_gain is None or math.isnan(delta_gain):
        return math.nan
    if delta_gain > 0.0:
        return 1.0
    if delta_gain < 0.0:
        return 0.0
    return math.nan


def r_indicator(e_t: float, e_tm1: float) -> float:
    """1 for positively correlated consecutive errors, 0 for negative, NaN at zero."""
    if math.isnan(e_t) or math.isnan(e_tm1):
        return math.nan
    prod = e_t * e_tm1
    if prod > 0.0:
        return 1.0
    if prod < 0.0:
        return 0.0
    return math.nan


def subject_median_split(abs_errors: np.ndarray) -> np.ndarray:
    """Flag absolute errors strictly below the subject's own median.

    The median is the midpoint of the two central order statistics for even
    counts.  Ties at the median get 0 (the comparison is strict), so when all
    errors are equal every flag is 0.
    """
    abs_errors = np.asarray(abs_errors, dtype=float)
    if abs_errors.size == 0 or np.isnan(abs_errors).all():
        raise ValueError("subject has no defined absolute errors")
    med = float(np.median(abs_errors[~np.isnan(abs_errors)]))
    flags = (abs_errors < med).astype(float)
    flags[np.isnan(abs_errors)] = math.nan
    return flags


def derive_panel(panel: pd.DataFrame) -> pd.DataFrame:
    """Append derived variables to a raw panel.

    Rows are sorted by subject and period.  ``G`` needs two consecutive
    periods (period gap of exactly 1) and a nonzero lagged error; ``dG`` is
    the change between gains at adjacent periods and sits on the earlier row,
    matching the regression timing where the outcome at period t is whether
    the gain rose going into t+1.  Rows with missing values are kept; the
    estimators drop them.

    Raises ValueError on duplicated (subject, period) rows.
    """
    missing = [c for c in PANEL_COLUMNS if c not in panel.columns]
    if missing:
        raise ValueError(f"panel is missing columns: {missing}")
    df = panel.loc[:, PANEL_COLUMNS].sort_values(SUBJECT_KEY + ["period"], kind="mergesort")
    df = df.reset_index(drop=True)
    dup = df.duplicated(subset=SUBJECT_KEY + ["period"])
    if dup.any():
        row = df.loc[dup.idxmax()]
        raise ValueError(
            "duplicate (subject, period) row: "
            f"{row['experiment']}/{row['treatment']}/{row['market_id']}/"
            f"{row['subject_id']} period {row['period']}"
        )

    parts = []
    for _, g in df.groupby(SUBJECT_KEY, sort=True):
        parts.append(_derive_subject(g))
    out = pd.concat(parts, ignore_index=True)
    return out


def _derive_subject(rows: pd.DataFrame) -> pd.DataFrame:
    rows = rows.copy()
    periods = rows["period"].to_numpy()
    f = rows["forecast"].to_numpy(dtype=float)
    p = rows["price"].to_numpy(dtype=float)
    n = len(rows)

    e = p - f
    abs_e = np.abs(e)

    g_vals = np.full(n, np.nan)
    r_vals = np.full(n, np.nan)
    adjacent = np.zeros(n, dtype=bool)
    adjacent[1:] = np.diff(periods) == 1
    for t in range(1, n):
        if adjacent[t]:
            g_vals[t] = gain(f[t], f[t - 1], p[t - 1])
            r_vals[t] = r_indicator(e[t], e[t - 1])

    # dG sits on the earlier row; NaN propagates whenever either gain is missing.
    dg = np.full(n, np.nan)
    dg[:-1] = g_vals[1:] - g_vals[:-1]

    y_vals = np.array([y_indicator(v) for v in dg])
    se = subject_median_split(abs_e)

    rows["e"] = e
    rows["abs_e"] = abs_e
    rows["G"] = g_vals
    rows["dG"] = dg
    rows["Y"] = y_vals
    rows["R"] = r_vals
    rows["SE"] = se
    return rows
