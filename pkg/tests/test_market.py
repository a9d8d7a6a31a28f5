"""Market simulation tests."""

import numpy as np
import pytest

from ltfelab.market import (
    FeedbackMap,
    MapKind,
    MarketConfig,
    asset_map,
    fundamental_value,
    linear_map,
    payoff,
    realize_price,
    run_market,
    validate_schedule,
)
from ltfelab.rules import AgentSpec, Rule, make_population

REE_SCHEDULE = ((1, 20, 56.0), (21, 43, 41.0), (44, 65, 62.0))


def _ada_agents(n, gain=0.5, initial=None):
    return tuple(
        AgentSpec(rule=Rule.ADA, gain_init=gain, forecast_noise_sd=0.0,
                  initial_forecast=initial)
        for _ in range(n)
    )


class TestRealizePrice:
    def test_asset_fixed_point_is_66(self):
        fmap = asset_map(noise_sd=0.0)
        assert realize_price(66.0, fmap, 1, 0.0) == pytest.approx(66.0, abs=1e-12)

    def test_negative_feedback_pushes_against_forecast(self):
        fmap = linear_map(-0.5, 56.0, horizon=10, noise_sd=0.0)
        assert realize_price(60.0, fmap, 3, 0.0) == pytest.approx(54.0)

    def test_positive_feedback_fundamental_fixed_point(self):
        fmap = linear_map(0.9, 56.0, horizon=10, noise_sd=0.0)
        assert realize_price(56.0, fmap, 1, 0.0) == pytest.approx(56.0)

    def test_monotone_in_mean_forecast(self):
        pos = linear_map(0.9, 56.0, horizon=5, noise_sd=0.0)
        neg = linear_map(-0.9, 56.0, horizon=5, noise_sd=0.0)
        assert realize_price(60.0, pos, 1, 0.0) > realize_price(50.0, pos, 1, 0.0)
        assert realize_price(60.0, neg, 1, 0.0) < realize_price(50.0, neg, 1, 0.0)


class TestFundamentalValue:
    def test_asset_pricing_dividend_over_interest(self):
        assert fundamental_value(asset_map(), 17) == pytest.approx(66.0)

    def test_schedule_lookup(self):
        fmap = linear_map(-0.5, REE_SCHEDULE, horizon=65, noise_sd=0.0)
        assert fundamental_value(fmap, 1) == 56.0
        assert fundamental_value(fmap, 30) == 41.0
        assert fundamental_value(fmap, 65) == 62.0

    def test_out_of_range_rejected(self):
        fmap = linear_map(-0.5, REE_SCHEDULE, horizon=65, noise_sd=0.0)
        with pytest.raises(ValueError):
            fundamental_value(fmap, 66)

    def test_schedule_gaps_rejected(self):
        with pytest.raises(ValueError):
            validate_schedule(((1, 20, 56.0), (22, 43, 41.0)))
        with pytest.raises(ValueError):
            validate_schedule(((1, 20, 56.0), (20, 43, 41.0)))


class TestFeedbackMapValidation:
    def test_linear_needs_slope(self):
        with pytest.raises(ValueError):
            FeedbackMap(kind=MapKind.LINEAR_POSITIVE, schedule=((1, 10, 56.0),))

    def test_slope_sign_must_match_kind(self):
        with pytest.raises(ValueError):
            FeedbackMap(kind=MapKind.LINEAR_POSITIVE, slope=-0.5,
                        schedule=((1, 10, 56.0),))

    def test_asset_pricing_takes_no_slope(self):
        with pytest.raises(ValueError):
            FeedbackMap(kind=MapKind.ASSET_PRICING, slope=0.5)


class TestPayoff:
    def test_zero_error_pays_100(self):
        assert payoff(66.0, 66.0) == 100.0

    def test_error_seven_pays_zero(self):
        assert payoff(59.0, 66.0) == 0.0
        assert payoff(73.0, 66.0) == 0.0

    def test_error_three_and_a_half_pays_75(self):
        assert payoff(66.0, 69.5) == pytest.approx(75.0, abs=1e-12)

    def test_range_and_boundaries(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            f, p = rng.uniform(0, 100, size=2)
            value = payoff(f, p)
            assert 0.0 <= value <= 100.0
            assert (value == 100.0) == (f == p)
            if abs(p - f) >= 7.0:
                assert value == 0.0


class TestRunMarket:
    def test_fundamentalists_pin_the_fixed_point(self):
        agents = tuple(
            AgentSpec(rule=Rule.FUNDAMENTALIST, forecast_noise_sd=0.0)
            for _ in range(4)
        )
        cfg = MarketConfig(fmap=asset_map(noise_sd=0.0), agents=agents,
                           horizon=20, seed=1)
        run = run_market(cfg)
        # period 1 forecasts are the fundamental too, so every price is 66
        assert np.allclose(run.prices, 66.0, atol=1e-10)

    def test_ada_two_step_hand_iteration(self):
        # five identical constant-gain agents from forecast 50 under slope -0.5
        # around fundamental 56: hand-iterating the rule and the map gives
        # price 59 then 56.75
        fmap = linear_map(-0.5, 56.0, horizon=10, noise_sd=0.0)
        cfg = MarketConfig(fmap=fmap, agents=_ada_agents(5, 0.5, initial=50.0),
                           horizon=10, seed=2)
        run = run_market(cfg)
        assert run.prices[0] == pytest.approx(59.0, abs=1e-12)
        assert run.forecasts[1, 0] == pytest.approx(54.5, abs=1e-12)
        assert run.prices[1] == pytest.approx(56.75, abs=1e-12)

    def test_identical_config_is_bit_identical(self):
        rng = np.random.default_rng(9)
        agents = make_population(Rule.RMBL, 6, rng=rng)
        fmap = linear_map(0.9, 56.0, horizon=30)
        cfg = MarketConfig(fmap=fmap, agents=agents, horizon=30, seed=77)
        r1, r2 = run_market(cfg), run_market(cfg)
        assert np.array_equal(r1.prices, r2.prices)
        assert np.array_equal(r1.forecasts, r2.forecasts)
        assert np.array_equal(r1.gains, r2.gains, equal_nan=True)

    def test_raising_initial_forecast_moves_first_price(self):
        fmap_pos = linear_map(0.9, 56.0, horizon=5, noise_sd=0.0)
        fmap_neg = linear_map(-0.9, 56.0, horizon=5, noise_sd=0.0)
        for fmap, sign in ((fmap_pos, 1.0), (fmap_neg, -1.0)):
            lo = run_market(MarketConfig(fmap=fmap, agents=_ada_agents(3, initial=40.0),
                                         horizon=5, seed=4))
            hi = run_market(MarketConfig(fmap=fmap, agents=_ada_agents(3, initial=60.0),
                                         horizon=5, seed=4))
            assert sign * (hi.prices[0] - lo.prices[0]) > 0

    def test_negative_feedback_converges_toward_fundamental(self):
        fmap = linear_map(-1.0 / 1.05, 56.0, horizon=50, noise_sd=0.0)
        cfg = MarketConfig(fmap=fmap, agents=_ada_agents(6, 0.5, initial=20.0),
                           horizon=50, seed=5)
        run = run_market(cfg)
        assert abs(run.prices[-1] - 56.0) < abs(run.prices[0] - 56.0)

    def test_clamping_counted_and_applied(self):
        fmap = linear_map(0.9, 56.0, horizon=5, noise_sd=0.0)
        agents = (
            AgentSpec(rule=Rule.ADA, forecast_noise_sd=0.0, initial_forecast=150.0),
            AgentSpec(rule=Rule.ADA, forecast_noise_sd=0.0, initial_forecast=50.0),
        )
        cfg = MarketConfig(fmap=fmap, agents=agents, horizon=5, seed=6)
        run = run_market(cfg)
        assert run.forecasts[0, 0] == 100.0  # period-1 upper bound
        assert run.clamp_count >= 1

    def test_metadata_names_rules_and_noise(self):
        agents = _ada_agents(2)
        fmap = linear_map(0.9, 56.0, horizon=5, noise_sd=0.0)
        run = run_market(MarketConfig(fmap=fmap, agents=agents, horizon=5, seed=8))
        meta = run.metadata()
        assert meta["rules"] == {"s01": "ada", "s02": "ada"}
        assert meta["clamped_forecasts"] == 0

    def test_config_validation(self):
        fmap = linear_map(0.9, 56.0, horizon=5, noise_sd=0.0)
        with pytest.raises(ValueError):
            MarketConfig(fmap=fmap, agents=_ada_agents(1), horizon=5, seed=0)
        with pytest.raises(ValueError):
            MarketConfig(fmap=fmap, agents=_ada_agents(2), horizon=6, seed=0)

    def test_sac_and_least_squares_agents_run(self):
        for rule in (Rule.SAC, Rule.LEAST_SQUARES):
            agents = tuple(
                AgentSpec(rule=rule, forecast_noise_sd=0.0, initial_forecast=50.0)
                for _ in range(3)
            )
            fmap = linear_map(-0.5, 56.0, horizon=20, noise_sd=0.0)
            run = run_market(MarketConfig(fmap=fmap, agents=agents, horizon=20, seed=3))
            assert np.isfinite(run.prices).all()
            # convergent cobweb: late prices settle near the fundamental
            assert abs(run.prices[-1] - 56.0) < abs(run.prices[0] - 56.0)
