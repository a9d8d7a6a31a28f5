"""Panel CSV schemas: strict ingestion and deterministic emission.

One flat schema serves simulated and external forecast panels:

    experiment,treatment,market_id,subject_id,period,forecast,price

The derived schema appends ``e,abs_e,G,dG,Y,R,SE``.  Missing values are the
literal token ``NA``; reals carry 9 significant digits; files are UTF-8 with
LF line endings so identical data yields identical bytes.
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import numpy as np
import pandas as pd

from .derive import DERIVED_COLUMNS, PANEL_COLUMNS, PanelObservation

NA = "NA"
_INDICATOR_COLUMNS = {"Y", "R", "SE"}


class PanelFormatError(ValueError):
    """Malformed panel file; the message names the offending line."""


def _quote(cell: str) -> str:
    if any(ch in cell for ch in (",", '"', "\n")):
        return '"' + cell.replace('"', '""') + '"'
    return cell


def format_real(x: float) -> str:
    """9-significant-digit decimal form; NA for NaN, -0 normalized."""
    if x is None or math.isnan(x):
        return NA
    if x == 0.0:
        x = 0.0
    return f"{x:.9g}"


def _format_cell(column: str, value) -> str:
    if column in ("experiment", "treatment", "market_id", "subject_id"):
        return str(value)
    if column == "period":
        return str(int(value))
    if column in _INDICATOR_COLUMNS:
        if value is None or (isinstance(value, float) and math.isnan(value)):
            return NA
        return str(int(value))
    return format_real(float(value))


def write_csv(df: pd.DataFrame, path, columns: list[str]) -> None:
    """Emit rows in the frame's order with typed formatting per column."""
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for row in df.itertuples(index=False):
        values = dict(zip(df.columns, row))
        buf.write(",".join(_quote(_format_cell(c, values[c])) for c in columns) + "\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="\n")


def emit_panel(panel: pd.DataFrame, path) -> None:
    df = panel.sort_values(
        ["experiment", "treatment", "market_id", "subject_id", "period"],
        kind="mergesort",
    )
    write_csv(df, path, PANEL_COLUMNS)


def emit_derived(derived: pd.DataFrame, path) -> None:
    df = derived.sort_values(
        ["experiment", "treatment", "market_id", "subject_id", "period"],
        kind="mergesort",
    )
    write_csv(df, path, DERIVED_COLUMNS)


def _parse_real(token: str, line_no: int, column: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise PanelFormatError(
            f"line {line_no}: column {column!r} has non-numeric value {token!r}"
        ) from None
    if math.isnan(value) or math.isinf(value):
        raise PanelFormatError(
            f"line {line_no}: column {column!r} must be finite, got {token!r}"
        )
    return value


def ingest_panel(path) -> list[PanelObservation]:
    """Read and validate a panel CSV.

    Raises :class:`PanelFormatError` naming the line for a wrong header,
    non-numeric or non-finite fields, bad periods, or duplicated
    (subject, period) rows.
    """
    observations = []
    seen: set[tuple] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PanelFormatError("line 1: empty file") from None
        if header != PANEL_COLUMNS:
            raise PanelFormatError(
                f"line 1: header must be {','.join(PANEL_COLUMNS)!r}, got {','.join(header)!r}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(PANEL_COLUMNS):
                raise PanelFormatError(
                    f"line {line_no}: expected {len(PANEL_COLUMNS)} fields, got {len(row)}"
                )
            experiment, treatment, market_id, subject_id, period_s, forecast_s, price_s = row
            try:
                period = int(period_s)
            except ValueError:
                raise PanelFormatError(
                    f"line {line_no}: period must be an integer, got {period_s!r}"
                ) from None
            if period < 1:
                raise PanelFormatError(f"line {line_no}: period must be >= 1, got {period}")
            key = (experiment, treatment, market_id, subject_id, period)
            if key in seen:
                raise PanelFormatError(
                    f"line {line_no}: duplicate (subject, period) row for "
                    f"{subject_id!r} period {period}"
                )
            seen.add(key)
            observations.append(
                PanelObservation(
                    experiment=experiment,
                    treatment=treatment,
                    market_id=market_id,
                    subject_id=subject_id,
                    period=period,
                    forecast=_parse_real(forecast_s, line_no, "forecast"),
                    price=_parse_real(price_s, line_no, "price"),
                )
            )
    return observations


def ingest_panel_frame(path) -> pd.DataFrame:
    """Ingest a panel CSV straight into a DataFrame."""
    obs = ingest_panel(path)
    if not obs:
        return pd.DataFrame(columns=PANEL_COLUMNS)
    return pd.DataFrame([vars(o) for o in obs], columns=PANEL_COLUMNS)


def write_table(df: pd.DataFrame, path, float_columns: set[str] | None = None) -> None:
    """Generic deterministic CSV emission for report tables."""
    float_columns = float_columns or set()
    columns = list(df.columns)
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for row in df.itertuples(index=False):
        cells = []
        for col, value in zip(columns, row):
            if value is None or (isinstance(value, float) and math.isnan(value)):
                cells.append(NA)
            elif col in float_columns or isinstance(value, (float, np.floating)):
                cells.append(format_real(float(value)))
            else:
                cells.append(_quote(str(value)))
        buf.write(",".join(cells) + "\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="\n")
