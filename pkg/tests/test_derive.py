"""Gain-extraction tests: derived variables invert the simulation."""

import math

import numpy as np
import pandas as pd
import pytest

from ltfelab.derive import (
    PANEL_COLUMNS,
    derive_panel,
    gain,
    panel_frame,
    r_indicator,
    subject_median_split,
    y_indicator,
    PanelObservation,
)
from ltfelab.market import MarketConfig, linear_map, run_market
from ltfelab.rules import AgentSpec, Rule, make_population


def _panel(rows):
    return pd.DataFrame(rows, columns=PANEL_COLUMNS)


def _row(subject, period, forecast, price, experiment="e1", treatment="t1", market="m1"):
    return (experiment, treatment, market, subject, period, forecast, price)


class TestGain:
    def test_definitional_values(self):
        assert gain(55.0, 50.0, 60.0) == pytest.approx(0.5)
        assert gain(45.0, 50.0, 60.0) == pytest.approx(-0.5)

    def test_zero_denominator_is_missing(self):
        assert math.isnan(gain(55.0, 50.0, 50.0))
        assert math.isnan(gain(55.0, 50.0, 50.0 + 1e-10))


class TestIndicators:
    def test_y_indicator(self):
        assert y_indicator(0.3) == 1.0
        assert y_indicator(-0.3) == 0.0
        assert math.isnan(y_indicator(0.0))
        assert math.isnan(y_indicator(math.nan))

    def test_r_indicator(self):
        assert r_indicator(2.0, 3.0) == 1.0
        assert r_indicator(2.0, -1.0) == 0.0
        assert math.isnan(r_indicator(0.0, 3.0))
        assert math.isnan(r_indicator(2.0, math.nan))


class TestMedianSplit:
    def test_even_count_uses_midpoint(self):
        flags = subject_median_split(np.array([1.0, 2.0, 3.0, 4.0]))
        assert flags.tolist() == [1.0, 1.0, 0.0, 0.0]

    def test_all_equal_gives_all_zero(self):
        flags = subject_median_split(np.array([2.0, 2.0, 2.0]))
        assert flags.tolist() == [0.0, 0.0, 0.0]

    def test_median_is_not_below_itself(self):
        # median of [0.2, 5.0, 0.3] is 0.3; the comparison is strict
        flags = subject_median_split(np.array([0.2, 5.0, 0.3]))
        assert flags.tolist() == [1.0, 0.0, 0.0]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            subject_median_split(np.array([]))


class TestDerivePanel:
    def test_ada_panel_reveals_the_constant_gain(self):
        fmap = linear_map(-0.5, 56.0, horizon=30, noise_sd=1.0)
        agents = tuple(
            AgentSpec(rule=Rule.ADA, gain_init=0.5, forecast_noise_sd=0.0)
            for _ in range(4)
        )
        run = run_market(MarketConfig(fmap=fmap, agents=agents, horizon=30, seed=11))
        derived = derive_panel(run.to_frame())
        g = derived["G"].dropna()
        assert len(g) > 100
        assert np.allclose(g, 0.5, atol=1e-12)

    def test_rmbl_panel_reveals_the_internal_gain(self):
        rng = np.random.default_rng(12)
        agents = make_population(Rule.RMBL, 5, rng=rng, forecast_noise_sd=0.0)
        fmap = linear_map(0.9, 56.0, horizon=40, noise_sd=1.0)
        run = run_market(MarketConfig(fmap=fmap, agents=agents, horizon=40, seed=13))
        derived = derive_panel(run.to_frame())
        checked = 0
        for j, subject in enumerate(run.subject_ids):
            rows = derived[derived["subject_id"] == subject].sort_values("period")
            g_extracted = rows["G"].to_numpy()
            for idx in range(1, len(rows)):
                if not math.isnan(g_extracted[idx]):
                    assert g_extracted[idx] == pytest.approx(
                        run.gains[idx, j], abs=1e-9
                    )
                    checked += 1
        assert checked > 150

    def test_two_period_subject_has_no_gain_change(self):
        panel = _panel([_row("s1", 1, 50.0, 60.0), _row("s1", 2, 55.0, 58.0)])
        derived = derive_panel(panel)
        assert derived["G"].notna().tolist() == [False, True]
        assert derived["dG"].isna().all()
        assert derived["Y"].isna().all()

    def test_gain_change_sits_on_the_earlier_row(self):
        panel = _panel(
            [
                _row("s1", 1, 50.0, 60.0),
                _row("s1", 2, 55.0, 58.0),   # G2 = 5/10 = 0.5
                _row("s1", 3, 57.0, 50.0),   # G3 = 2/3
            ]
        )
        derived = derive_panel(panel).set_index("period")
        assert derived.loc[2, "G"] == pytest.approx(0.5)
        assert derived.loc[3, "G"] == pytest.approx(2.0 / 3.0)
        assert derived.loc[2, "dG"] == pytest.approx(2.0 / 3.0 - 0.5)
        assert derived.loc[2, "Y"] == 1.0
        assert math.isnan(derived.loc[3, "dG"])

    def test_period_gaps_break_adjacency(self):
        panel = _panel(
            [
                _row("s1", 1, 50.0, 60.0),
                _row("s1", 3, 55.0, 58.0),  # gap: no lagged observation
                _row("s1", 4, 57.0, 50.0),
            ]
        )
        derived = derive_panel(panel).set_index("period")
        assert math.isnan(derived.loc[3, "G"])
        assert not math.isnan(derived.loc[4, "G"])
        assert math.isnan(derived.loc[3, "R"])

    def test_duplicate_subject_period_rejected(self):
        panel = _panel([_row("s1", 3, 50.0, 60.0), _row("s1", 3, 51.0, 60.0)])
        with pytest.raises(ValueError, match="duplicate"):
            derive_panel(panel)

    def test_missing_r_count_matches_zero_products(self):
        rng = np.random.default_rng(4)
        rows = []
        prices = rng.uniform(40, 60, size=20)
        forecasts = prices.copy()
        forecasts[5] = prices[5]          # zero error at period 6
        forecasts[10] += 2.0
        forecasts[0] += 1.0
        for t in range(20):
            rows.append(_row("s1", t + 1, float(forecasts[t]), float(prices[t])))
        derived = derive_panel(_panel(rows)).sort_values("period")
        e = derived["e"].to_numpy()
        expected_missing = 1  # first row
        for t in range(1, 20):
            if e[t] * e[t - 1] == 0.0:
                expected_missing += 1
        assert int(derived["R"].isna().sum()) == expected_missing

    def test_median_split_is_strict_within_subject(self):
        fmap = linear_map(-0.5, 56.0, horizon=21, noise_sd=1.0)
        agents = tuple(
            AgentSpec(rule=Rule.ADA, gain_init=0.4, forecast_noise_sd=0.1)
            for _ in range(3)
        )
        run = run_market(MarketConfig(fmap=fmap, agents=agents, horizon=21, seed=14))
        derived = derive_panel(run.to_frame())
        for _, rows in derived.groupby("subject_id"):
            med = rows["abs_e"].median()
            below = rows[rows["SE"] == 1.0]
            assert (below["abs_e"] < med).all()
            n_below = len(below)
            n_above = len(rows) - n_below
            ties = int((rows["abs_e"] == med).sum())
            assert abs(n_above - n_below) <= ties + 1

    def test_panel_frame_round_trip_types(self):
        obs = [
            PanelObservation("e1", "t1", "m1", "s1", 1, 50.0, 60.0),
            PanelObservation("e1", "t1", "m1", "s1", 2, 55.0, 58.0),
        ]
        frame = panel_frame(obs)
        assert list(frame.columns) == PANEL_COLUMNS
        derived = derive_panel(frame)
        assert len(derived) == 2
