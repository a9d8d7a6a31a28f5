"""Command-line interface.

Subcommands::

    ltfelab simulate --config cfg.ini --out-dir out          # panel.csv
    ltfelab extract  --input panel.csv --out-dir out         # derived.csv
    ltfelab fit      --input panel.csv --out-dir out         # coefficients.csv
    ltfelab classify --input panel.csv --out-dir out         # + classification.csv
    ltfelab pipeline --config cfg.ini --out-dir out          # everything
    ltfelab replay   --input coeffs.csv --out-dir out        # classify published tables

Exit code 0 on success; estimator convergence warnings keep exit 0 unless
``--strict`` is given; validation errors exit nonzero with a diagnostic.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .classify import VARIANTS
from .config import RunConfig, load_config
from .panel_io import PanelFormatError, emit_derived, emit_panel, ingest_panel_frame, write_table
from .pipeline import (
    classification_table,
    coefficient_table,
    run_pipeline,
    simulate_panel,
)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out-dir", default="out", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--alpha", type=float, default=None, help="significance level")
    parser.add_argument("--huber-tuning", type=float, default=None)
    parser.add_argument(
        "--variant",
        action="append",
        choices=VARIANTS,
        default=None,
        help="analysis variant (repeatable; default: all)",
    )
    parser.add_argument(
        "--strict", action="store_true",
        help="exit nonzero when any estimator flags non-convergence",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ltfelab",
        description="simulate forecast panels, extract gains, classify learning rules",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="simulate markets into a panel CSV")
    p_sim.add_argument("--config", required=True)
    _add_common(p_sim)

    p_ext = sub.add_parser("extract", help="derive regression variables from a panel CSV")
    p_ext.add_argument("--input", required=True)
    _add_common(p_ext)

    p_fit = sub.add_parser("fit", help="estimate the learning-speed regressions")
    p_fit.add_argument("--input", required=True)
    _add_common(p_fit)

    p_cls = sub.add_parser("classify", help="fit and classify a panel CSV")
    p_cls.add_argument("--input", required=True)
    _add_common(p_cls)

    p_pipe = sub.add_parser("pipeline", help="simulate (or ingest) and run everything")
    p_pipe.add_argument("--config", required=True)
    p_pipe.add_argument("--input", default=None, help="analyze this panel instead of simulating")
    _add_common(p_pipe)

    p_rep = sub.add_parser("replay", help="classify a published coefficient CSV")
    p_rep.add_argument(
        "--input",
        default=None,
        help="coefficient CSV (default: the bundled reference tables)",
    )
    _add_common(p_rep)
    return parser


def _run_config(args, require_config: bool) -> RunConfig:
    if getattr(args, "config", None):
        cfg = load_config(args.config)
    elif require_config:
        raise ValueError("--config is required")
    else:
        cfg = RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.alpha is not None:
        cfg.alpha = args.alpha
    if args.huber_tuning is not None:
        cfg.huber_tuning = args.huber_tuning
    if args.variant:
        cfg.variants = tuple(args.variant)
    return cfg


def _finish(warnings: list[str], strict: bool) -> int:
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    return 1 if (strict and warnings) else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = Path(args.out_dir)
    try:
        if args.command == "simulate":
            cfg = _run_config(args, require_config=True)
            out_dir.mkdir(parents=True, exist_ok=True)
            panel, _meta = simulate_panel(cfg)
            emit_panel(panel, out_dir / "panel.csv")
            print(out_dir / "panel.csv")
            return 0

        if args.command == "extract":
            from .derive import derive_panel

            out_dir.mkdir(parents=True, exist_ok=True)
            panel = ingest_panel_frame(args.input)
            emit_derived(derive_panel(panel), out_dir / "derived.csv")
            print(out_dir / "derived.csv")
            return 0

        if args.command in ("fit", "classify"):
            from .pipeline import analyze_panel

            cfg = _run_config(args, require_config=False)
            out_dir.mkdir(parents=True, exist_ok=True)
            panel = ingest_panel_frame(args.input)
            derived, classifications, ada_fits, warnings = analyze_panel(
                panel, alpha=cfg.alpha, huber_tuning=cfg.huber_tuning, variants=cfg.variants
            )
            write_table(coefficient_table(classifications), out_dir / "coefficients.csv")
            print(out_dir / "coefficients.csv")
            if args.command == "classify":
                write_table(
                    classification_table(classifications, ada_fits),
                    out_dir / "classification.csv",
                )
                print(out_dir / "classification.csv")
            return _finish(warnings, args.strict)

        if args.command == "pipeline":
            cfg = _run_config(args, require_config=True)
            panel = ingest_panel_frame(args.input) if args.input else None
            result = run_pipeline(cfg, out_dir, panel=panel)
            for path in result.outputs.values():
                print(path)
            return _finish(result.warnings, args.strict)

        if args.command == "replay":
            import pandas as pd

            from .refdata import load_reference_table, replay_classifications

            cfg = _run_config(args, require_config=False)
            out_dir.mkdir(parents=True, exist_ok=True)
            if args.input:
                table = pd.read_csv(args.input)
            else:
                table = pd.concat(
                    [load_reference_table("binary"), load_reference_table("huber")],
                    ignore_index=True,
                )
            classifications = replay_classifications(table, alpha=cfg.alpha)
            rows = coefficient_table(classifications)
            write_table(rows, out_dir / "replay_classification.csv")
            print(out_dir / "replay_classification.csv")
            return 0

        raise AssertionError(args.command)  # pragma: no cover
    except (ValueError, PanelFormatError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
