"""Closed loop in memory: simulate satisficing learners, recover the rule.

Builds ten positive-feedback and ten negative-feedback markets populated by
satisficing gain-adaptive agents, derives the revealed-gain panel, fits the
binary learning-speed regressions, and prints the verdicts.
"""

import numpy as np
import pandas as pd

from ltfelab.classify import classify_fit, fit_variant, split_sample_coefficients
from ltfelab.derive import derive_panel
from ltfelab.econometrics import estimate_ada_slope
from ltfelab.market import MarketConfig, linear_map, run_market
from ltfelab.rules import Rule, make_population

SLOPE = 1.0 / 1.05
SEED = 2024

frames = []
rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([SEED])))
for m in range(20):
    slope = SLOPE if m < 10 else -SLOPE
    agents = make_population(Rule.RMBL, 6, meta_rate=0.1, forecast_noise_sd=0.25, rng=rng)
    cfg = MarketConfig(
        fmap=linear_map(slope, 56.0, 50, noise_sd=1.0),
        agents=agents,
        horizon=50,
        seed=(SEED, m),
        experiment="satisficing-demo",
        treatment="positive" if slope > 0 else "negative",
        market_id=f"mk{m:02d}",
    )
    frames.append(run_market(cfg).to_frame())

panel = pd.concat(frames, ignore_index=True)
derived = derive_panel(panel)
print(f"panel: {len(panel)} rows, {panel['subject_id'].nunique() * 20} subject series")
print(f"median absolute error: {derived['abs_e'].median():.3f}")

ada_fit = estimate_ada_slope(derived)
ada_ok = bool(ada_fit.extra["ci_in_unit_interval"])
print(f"revealed average gain {ada_fit.params[0]:.3f} "
      f"(95% CI inside (0,1): {ada_ok})\n")

print(f"{'variant':20} {'delta':>10} {'gamma':>10} {'verdict':>14}  threshold")
for variant in ("binary-continuous", "binary-discrete"):
    fit = fit_variant(derived, variant)
    cls = classify_fit(fit, ada_ok, 0.05, experiment="satisficing-demo", variant=variant)
    _, r_idx, exr_idx = fit.triple_indices()
    print(
        f"{variant:20} {fit.params[exr_idx]:>10.3f} {fit.params[r_idx]:>10.3f}"
        f" {cls.verdict:>14}  {cls.z_location}"
    )

print("\nsplit-sample correlation coefficients (binary outcome):")
table = split_sample_coefficients(derived, estimator="binary")
for _, row in table.iterrows():
    print(
        f"  error {row['split']:12s} coef {row['coef_r']:+.3f}"
        f" (se {row['se_r']:.3f}), mean |error| {row['mean_abs_e']:.2f}"
    )
print(
    "\nA weaker correlation effect below the subject-level median error is"
    "\nthe satisficing signature the discrete interaction coefficient tests."
)
