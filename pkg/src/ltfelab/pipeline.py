"""Pipeline orchestration: simulate, derive, fit, classify, report.

Given a run configuration (or an external panel), the pipeline derives the
regression variables, runs each requested analysis variant per experiment,
classifies the outcome, and writes deterministic CSV reports plus a text
summary.  All outputs are pure functions of (config, seed).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import pandas as pd

from . import __version__
from .classify import (
    Classification,
    classify_fit,
    fit_variant,
    split_sample_coefficients,
)
from .config import RunConfig, market_configs
from .derive import derive_panel
from .econometrics import FitResult, LinearComboTest, estimate_ada_slope, wald_linear_combo
from .market import run_market
from .panel_io import emit_derived, emit_panel, write_table

COEFFICIENT_COLUMNS = [
    "experiment", "variant", "estimator", "converged",
    "beta", "beta_se", "beta_p", "gamma", "gamma_se", "gamma_p",
    "delta", "delta_se", "delta_p", "combo", "combo_se", "combo_p",
    "n_obs", "n_subjects", "dropped_subjects", "classification", "z_location",
]
CLASSIFICATION_COLUMNS = [
    "experiment", "variant", "verdict", "z_location", "reason", "alpha",
    "ada_slope", "ada_slope_in_unit",
]


@dataclass
class PipelineResult:
    panel: pd.DataFrame
    derived: pd.DataFrame
    classifications: list[Classification]
    ada_fits: dict[str, FitResult]
    outputs: dict[str, Path] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


def simulate_panel(cfg: RunConfig) -> tuple[pd.DataFrame, dict]:
    """Run every configured market; returns the pooled panel and metadata."""
    if not cfg.markets:
        raise ValueError("config defines no markets to simulate")
    frames = []
    market_meta = []
    for mc in market_configs(cfg):
        run = run_market(mc)
        frames.append(run.to_frame())
        market_meta.append(run.metadata())
    panel = pd.concat(frames, ignore_index=True)
    meta = {
        "package_version": __version__,
        "seed": cfg.seed,
        "n_markets": len(market_meta),
        "markets": market_meta,
    }
    return panel, meta


def _triple(fit: FitResult, role: int) -> tuple[float, float, float]:
    idx = fit.triple_indices()[role]
    return (
        float(fit.params[idx]),
        float(fit.se[idx]),
        float(fit.p_values[idx]),
    )


def analyze_panel(
    panel: pd.DataFrame,
    *,
    alpha: float = 0.05,
    huber_tuning: float = 1.345,
    variants: tuple[str, ...],
) -> tuple[pd.DataFrame, list[Classification], dict[str, FitResult], list[str]]:
    """Derive and classify every experiment under every requested variant."""
    derived = derive_panel(panel)
    classifications: list[Classification] = []
    ada_fits: dict[str, FitResult] = {}
    warnings: list[str] = []
    for experiment, rows in derived.groupby("experiment", sort=True):
        ada_fit = estimate_ada_slope(rows)
        ada_fits[str(experiment)] = ada_fit
        ada_ok = bool(ada_fit.extra.get("ci_in_unit_interval", False))
        for variant in variants:
            try:
                fit = fit_variant(rows, variant, huber_tuning=huber_tuning)
            except (ValueError, FloatingPointError) as exc:
                warnings.append(f"{experiment}/{variant}: fit failed ({exc})")
                continue
            if not fit.converged:
                warnings.append(
                    f"{experiment}/{variant}: estimator flagged non-convergence"
                )
            cls = classify_fit(
                fit, ada_ok, alpha, experiment=str(experiment), variant=variant
            )
            classifications.append(cls)
    return derived, classifications, ada_fits, warnings


def coefficient_table(classifications: list[Classification]) -> pd.DataFrame:
    records = []
    for cls in classifications:
        fit = cls.fit
        beta = _triple(fit, 0)
        gamma = _triple(fit, 1)
        delta = _triple(fit, 2)
        combo = cls.combo
        if combo is None and fit.design is not None and fit.design.error_form == "discrete":
            try:
                combo = wald_linear_combo(fit, (0.0, 1.0, 1.0))
            except ValueError:
                combo = None
        combo = combo or LinearComboTest(math.nan, math.nan, math.nan)
        records.append(
            {
                "experiment": cls.experiment,
                "variant": cls.variant,
                "estimator": fit.estimator,
                "converged": fit.converged,
                "beta": beta[0], "beta_se": beta[1], "beta_p": beta[2],
                "gamma": gamma[0], "gamma_se": gamma[1], "gamma_p": gamma[2],
                "delta": delta[0], "delta_se": delta[1], "delta_p": delta[2],
                "combo": combo.estimate, "combo_se": combo.se, "combo_p": combo.p_value,
                "n_obs": fit.n_obs,
                "n_subjects": fit.n_subjects,
                "dropped_subjects": fit.dropped_subjects,
                "classification": cls.verdict,
                "z_location": cls.z_location,
            }
        )
    return pd.DataFrame.from_records(records, columns=COEFFICIENT_COLUMNS)


def classification_table(
    classifications: list[Classification], ada_fits: dict[str, FitResult]
) -> pd.DataFrame:
    records = []
    for cls in classifications:
        ada_fit = ada_fits.get(cls.experiment)
        records.append(
            {
                "experiment": cls.experiment,
                "variant": cls.variant,
                "verdict": cls.verdict,
                "z_location": cls.z_location,
                "reason": cls.reason,
                "alpha": cls.alpha,
                "ada_slope": float(ada_fit.params[0]) if ada_fit is not None else math.nan,
                "ada_slope_in_unit": bool(ada_fit.extra.get("ci_in_unit_interval", False))
                if ada_fit is not None
                else False,
            }
        )
    return pd.DataFrame.from_records(records, columns=CLASSIFICATION_COLUMNS)


def summary_text(classifications: list[Classification], warnings: list[str]) -> str:
    lines = ["rule classification summary", "=" * 27, ""]
    by_exp: dict[str, list[Classification]] = {}
    for cls in classifications:
        by_exp.setdefault(cls.experiment, []).append(cls)
    for experiment in sorted(by_exp):
        lines.append(experiment)
        for cls in by_exp[experiment]:
            z = f", threshold {cls.z_location}" if cls.z_location != "n/a" else ""
            lines.append(f"  {cls.variant:18s} -> {cls.verdict}{z}")
        lines.append("")
    if warnings:
        lines.append("warnings")
        lines.extend(f"  {w}" for w in warnings)
        lines.append("")
    return "\n".join(lines)


def run_pipeline(
    cfg: RunConfig,
    out_dir,
    *,
    panel: pd.DataFrame | None = None,
    emit_outputs: bool = True,
) -> PipelineResult:
    """Full chain: (simulate or ingest) -> derive -> fit -> classify -> report."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metadata = {"package_version": __version__, "seed": cfg.seed, "alpha": cfg.alpha}
    simulated = panel is None
    if simulated:
        panel, sim_meta = simulate_panel(cfg)
        metadata.update(sim_meta)

    derived, classifications, ada_fits, warnings = analyze_panel(
        panel, alpha=cfg.alpha, huber_tuning=cfg.huber_tuning, variants=cfg.variants
    )

    result = PipelineResult(
        panel=panel,
        derived=derived,
        classifications=classifications,
        ada_fits=ada_fits,
        metadata=metadata,
        warnings=warnings,
    )
    if not emit_outputs:
        return result

    outputs = result.outputs
    if simulated:
        outputs["panel"] = out_dir / "panel.csv"
        emit_panel(panel, outputs["panel"])
    outputs["derived"] = out_dir / "derived.csv"
    emit_derived(derived, outputs["derived"])

    outputs["coefficients"] = out_dir / "coefficients.csv"
    write_table(coefficient_table(classifications), outputs["coefficients"])

    outputs["classification"] = out_dir / "classification.csv"
    write_table(classification_table(classifications, ada_fits), outputs["classification"])

    split_frames = []
    families = sorted({v.split("-")[0] for v in cfg.variants})
    for family in families:
        split_frames.append(split_sample_coefficients(derived, estimator=family))
    split = (
        pd.concat(split_frames, ignore_index=True)
        if split_frames
        else split_sample_coefficients(derived)
    )
    split = split.sort_values(["estimator", "experiment", "split"], kind="mergesort")
    outputs["split_coefficients"] = out_dir / "split_coefficients.csv"
    write_table(split, outputs["split_coefficients"])

    outputs["summary"] = out_dir / "summary.txt"
    outputs["summary"].write_text(
        summary_text(classifications, warnings), encoding="utf-8", newline="\n"
    )

    outputs["metadata"] = out_dir / "run_metadata.json"
    outputs["metadata"].write_text(
        json.dumps(metadata, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
        newline="\n",
    )
    return result
