"""Forecasting-rule unit and property tests."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ltfelab.rules import (
    AgentSpec,
    AgentState,
    Rule,
    ada_forecast,
    ar1_slope,
    gain_gradient,
    initial_state,
    least_squares_forecast,
    make_population,
    omega,
    rmbl_step,
    sac_forecast,
)

finite = st.floats(min_value=-1e4, max_value=1e4, allow_nan=False)


class TestAdaForecast:
    def test_half_gain(self):
        assert ada_forecast(50.0, 60.0, 0.5) == pytest.approx(55.0, abs=1e-12)

    def test_zero_error_fixed_point(self):
        assert ada_forecast(50.0, 50.0, 0.3) == pytest.approx(50.0, abs=1e-12)

    def test_naive_expectation_limit(self):
        assert ada_forecast(50.0, 60.0, 1.0 - 1e-12) == pytest.approx(60.0, abs=1e-9)

    def test_gain_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            ada_forecast(50.0, 60.0, 1.0)
        with pytest.raises(ValueError):
            ada_forecast(50.0, 60.0, 0.0)

    @given(prev=finite, price=finite, g=st.floats(min_value=1e-9, max_value=1 - 1e-9))
    def test_convexity(self, prev, price, g):
        # forecast lies weakly between the previous forecast and the price
        f = ada_forecast(prev, price, g)
        assert min(prev, price) - 1e-9 <= f <= max(prev, price) + 1e-9


class TestOmega:
    def test_examples(self):
        assert omega(3.0, 5.0) == pytest.approx(4.0)
        assert omega(3.0, 9.0) == pytest.approx(0.0)
        assert omega(0.0, 0.0) == 0.0

    def test_negative_threshold_rejected(self):
        with pytest.raises(ValueError):
            omega(1.0, -0.1)


class TestGainGradient:
    def test_too_timid(self):
        assert gain_gradient(4.0, 3.0, 2.0) == pytest.approx(96.0)

    def test_too_aggressive(self):
        assert gain_gradient(4.0, 3.0, -2.0) == pytest.approx(-96.0)

    def test_optimality(self):
        assert gain_gradient(0.0, 3.0, 2.0) == 0.0

    def test_matches_negated_finite_difference(self):
        # the drive equals minus the numerical derivative of the squared
        # excess error with respect to the gain
        rng = np.random.default_rng(5)
        for _ in range(30):
            p_t = rng.uniform(-5, 5)
            f_tm1 = rng.uniform(-5, 5)
            e_tm1 = rng.uniform(0.5, 3.0) * rng.choice([-1.0, 1.0])
            z = rng.uniform(0.0, 3.0)
            g0 = rng.uniform(0.05, 0.95)

            def sq_excess(g):
                e_t = p_t - f_tm1 - g * e_tm1
                return omega(e_t, z) ** 2

            h = 1e-5
            fd = (sq_excess(g0 + h) - sq_excess(g0 - h)) / (2 * h)
            e_t0 = p_t - f_tm1 - g0 * e_tm1
            drive = gain_gradient(omega(e_t0, z), e_t0, e_tm1)
            if abs(fd) > 1e-3:
                assert drive == pytest.approx(-fd, rel=1e-5)


class TestAgentSpecValidation:
    def test_ada_requires_zero_meta_rate(self):
        with pytest.raises(ValueError):
            AgentSpec(rule=Rule.ADA, meta_rate=0.1)

    def test_idbd_requires_zero_threshold(self):
        with pytest.raises(ValueError):
            AgentSpec(rule=Rule.IDBD, meta_rate=0.1, threshold=1.0)

    def test_gain_bounds(self):
        with pytest.raises(ValueError):
            AgentSpec(rule=Rule.ADA, gain_init=1.0)


def _rmbl_spec(threshold=1.0, meta_rate=0.1):
    return AgentSpec(rule=Rule.RMBL, meta_rate=meta_rate, threshold=threshold,
                     forecast_noise_sd=0.0)


class TestRmblStep:
    def test_rejects_non_adaptive_rules(self):
        spec = AgentSpec(rule=Rule.SAC)
        state = initial_state(spec, 50.0)
        with pytest.raises(ValueError):
            rmbl_step(state, 55.0, spec)

    def test_satisficing_region_keeps_gain_bit_identical(self):
        spec = _rmbl_spec(threshold=4.0)
        state = AgentState(gain_param=0.3, last_forecast=50.0, last_error=1.5)
        # error = 1.0, squared error 1.0 <= threshold 4.0
        _, new_state = rmbl_step(state, 51.0, spec)
        assert new_state.gain_param == state.gain_param

    def test_boundary_excess_zero_keeps_gain(self):
        spec = _rmbl_spec(threshold=4.0)
        state = AgentState(gain_param=0.3, last_forecast=50.0, last_error=1.5)
        _, new_state = rmbl_step(state, 52.0, spec)  # error exactly 2, omega 0
        assert new_state.gain_param == state.gain_param

    def test_first_step_has_no_error_memory(self):
        spec = _rmbl_spec(threshold=0.25)
        state = initial_state(spec, 50.0)
        _, new_state = rmbl_step(state, 60.0, spec)
        assert new_state.gain_param == state.gain_param
        assert new_state.last_error == pytest.approx(10.0)

    def test_positive_correlation_raises_gain(self):
        spec = _rmbl_spec(threshold=1.0)
        state = AgentState(gain_param=0.0, last_forecast=50.0, last_error=2.0)
        _, new_state = rmbl_step(state, 53.0, spec)  # error 3, same sign as 2
        assert new_state.gain_param > state.gain_param

    def test_negative_correlation_lowers_gain(self):
        spec = _rmbl_spec(threshold=1.0)
        state = AgentState(gain_param=0.0, last_forecast=50.0, last_error=-2.0)
        _, new_state = rmbl_step(state, 53.0, spec)
        assert new_state.gain_param < state.gain_param

    def test_forecast_uses_updated_gain(self):
        spec = _rmbl_spec(threshold=0.0)
        state = AgentState(gain_param=0.0, last_forecast=50.0, last_error=2.0)
        forecast, new_state = rmbl_step(state, 53.0, spec)
        assert forecast == pytest.approx(50.0 + new_state.gain * 3.0)

    @given(
        prices=st.lists(st.floats(min_value=0, max_value=100), min_size=2, max_size=30),
        gain_init=st.floats(min_value=0.05, max_value=0.95),
        meta_rate=st.floats(min_value=0.0, max_value=0.5),
    )
    @settings(max_examples=60, deadline=None)
    def test_idbd_equals_rmbl_at_zero_threshold(self, prices, gain_init, meta_rate):
        rmbl = AgentSpec(rule=Rule.RMBL, gain_init=gain_init, meta_rate=meta_rate,
                         threshold=0.0, forecast_noise_sd=0.0)
        idbd = AgentSpec(rule=Rule.IDBD, gain_init=gain_init, meta_rate=meta_rate,
                         threshold=0.0, forecast_noise_sd=0.0)
        s1 = initial_state(rmbl, 50.0)
        s2 = initial_state(idbd, 50.0)
        for p in prices:
            f1, s1 = rmbl_step(s1, p, rmbl)
            f2, s2 = rmbl_step(s2, p, idbd)
            assert f1 == f2
            assert s1.gain_param == s2.gain_param

    @given(
        prices=st.lists(st.floats(min_value=-50, max_value=150), min_size=1, max_size=50),
        threshold=st.floats(min_value=0.0, max_value=9.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_gain_stays_inside_unit_interval(self, prices, threshold):
        spec = AgentSpec(rule=Rule.RMBL, meta_rate=0.5, threshold=threshold,
                         forecast_noise_sd=0.0)
        state = initial_state(spec, 50.0)
        for p in prices:
            _, state = rmbl_step(state, p, spec)
            assert 0.0 < state.gain < 1.0


class TestSacForecast:
    def test_constant_history(self):
        assert sac_forecast([60.0, 60.0, 60.0]) == pytest.approx(60.0)

    def test_single_observation(self):
        assert sac_forecast([60.0]) == pytest.approx(60.0)

    def test_two_observations_have_zero_autocorrelation(self):
        assert sac_forecast([50.0, 60.0]) == pytest.approx(55.0)

    def test_alternating_history_matches_literal_sums(self):
        history = [50.0, 60.0] * 10
        n = len(history)
        mean = sum(history) / n
        c0 = sum((p - mean) ** 2 for p in history) / n
        c1 = sum(
            (history[t] - mean) * (history[t + 1] - mean) for t in range(n - 1)
        ) / n
        expected = mean + (c1 / c0) * (history[-1] - mean)
        assert expected == pytest.approx(50.25, abs=1e-12)  # frozen from the sums
        assert sac_forecast(history) == pytest.approx(expected, abs=1e-12)

    def test_empty_history_rejected(self):
        with pytest.raises(ValueError):
            sac_forecast([])


class TestLeastSquaresForecast:
    def test_constant_history(self):
        assert least_squares_forecast([42.0] * 5) == pytest.approx(42.0)

    def test_recovers_ar1_slope_exactly(self):
        prices = [10.0]
        for _ in range(30):
            prices.append(0.5 * prices[-1] + 30.0)
        assert ar1_slope(prices) == pytest.approx(0.5, abs=1e-9)
        alpha = sum(prices) / len(prices)
        expected = alpha + 0.5 * (prices[-1] - alpha)
        assert least_squares_forecast(prices) == pytest.approx(expected, abs=1e-9)

    def test_two_observations_degenerate_slope(self):
        # one regression pair with zero lagged variance: slope 0, running mean
        assert ar1_slope([50.0, 60.0]) == 0.0
        assert least_squares_forecast([50.0, 60.0]) == pytest.approx(55.0)


class TestMakePopulation:
    def test_rmbl_draws_thresholds_from_range(self):
        rng = np.random.default_rng(3)
        specs = make_population(Rule.RMBL, 50, rng=rng)
        zs = [s.threshold for s in specs]
        assert all(0.25 <= z <= 4.0 for z in zs)
        assert len(set(zs)) > 1

    def test_rmbl_without_rng_rejected(self):
        with pytest.raises(ValueError):
            make_population(Rule.RMBL, 3)

    def test_ada_population_has_constant_gain(self):
        specs = make_population(Rule.ADA, 4, gain_init=0.5, forecast_noise_sd=0.0)
        assert all(s.meta_rate == 0.0 for s in specs)
