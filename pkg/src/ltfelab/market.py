"""Synthetic learning-to-forecast market simulation.

A market iterates a price law of motion over the mean forecast of a small
agent population: an asset-pricing map discounts the mean forecast plus a
dividend, and linear maps pull the price toward a scheduled fundamental with
a positive or negative feedback slope.  A run returns the full panel of
(subject, period, forecast, price) rows plus per-agent gain logs for
inversion checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .rules import Agent, AgentSpec, ADAPTIVE_RULES

#: Forecast bounds: period 1, then all later periods.
DEFAULT_BOUNDS_FIRST = (0.0, 100.0)
DEFAULT_BOUNDS_REST = (0.0, 1000.0)


class MapKind(str, Enum):
    ASSET_PRICING = "asset_pricing"
    LINEAR_POSITIVE = "linear_positive"
    LINEAR_NEGATIVE = "linear_negative"


@dataclass(frozen=True)
class FeedbackMap:
    """Price law of motion.

    ``asset_pricing`` realizes ``(mean_forecast + dividend) / (1 + interest)``
    with fundamental ``dividend / interest``; the linear kinds realize
    ``f_t + slope * (mean_forecast - f_t)`` around the scheduled fundamental
    ``f_t``.  ``schedule`` is a tuple of ``(first_period, last_period, value)``
    segments partitioning the horizon; the asset map may omit it.
    """

    kind: MapKind
    interest: float = 0.05
    dividend: float = 3.3
    slope: float | None = None
    schedule: tuple[tuple[int, int, float], ...] | None = None
    noise_sd: float = 1.0

    def __post_init__(self) -> None:
        if self.interest <= 0.0:
            raise ValueError("interest must be > 0")
        if self.dividend <= 0.0:
            raise ValueError("dividend must be > 0")
        if self.noise_sd < 0.0:
            raise ValueError("noise_sd must be >= 0")
        if self.kind is MapKind.ASSET_PRICING:
            if self.slope is not None:
                raise ValueError("asset_pricing map takes no slope")
        else:
            if self.slope is None or not -1.0 < self.slope < 1.0 or self.slope == 0.0:
                raise ValueError("linear map needs slope in (-1, 1) excluding 0")
            if self.kind is MapKind.LINEAR_POSITIVE and self.slope < 0.0:
                raise ValueError("linear_positive needs slope > 0")
            if self.kind is MapKind.LINEAR_NEGATIVE and self.slope > 0.0:
                raise ValueError("linear_negative needs slope < 0")
            if self.schedule is None:
                raise ValueError("linear map needs a fundamental schedule")
        if self.schedule is not None:
            validate_schedule(self.schedule)


def validate_schedule(schedule: tuple[tuple[int, int, float], ...]) -> None:
    """Require contiguous period segments starting at 1, no gaps or overlaps."""
    if not schedule:
        raise ValueError("schedule must not be empty")
    expected = 1
    for start, end, _value in schedule:
        if start != expected:
            raise ValueError(f"schedule gap or overlap at period {start}")
        if end < start:
            raise ValueError(f"empty schedule segment ({start}, {end})")
        expected = end + 1


def fundamental_value(fmap: FeedbackMap, t: int) -> float:
    """Scheduled fundamental at period ``t``; dividend/interest for the asset map."""
    if fmap.schedule is not None:
        for start, end, value in fmap.schedule:
            if start <= t <= end:
                return value
        raise ValueError(f"period {t} outside the fundamental schedule")
    if fmap.kind is MapKind.ASSET_PRICING:
        return fmap.dividend / fmap.interest
    raise ValueError("linear map has no schedule")  # unreachable after validation


def realize_price(mean_forecast: float, fmap: FeedbackMap, t: int, noise: float) -> float:
    """Realized price given the mean forecast at period ``t``."""
    if fmap.kind is MapKind.ASSET_PRICING:
        return (mean_forecast + fmap.dividend) / (1.0 + fmap.interest) + noise
    f_t = fundamental_value(fmap, t)
    return f_t + fmap.slope * (mean_forecast - f_t) + noise


def payoff(forecast: float, price: float) -> float:
    """Points earned for a forecast: 100 at zero error, 0 beyond error 7."""
    err = price - forecast
    return max(100.0 - (100.0 / 49.0) * err * err, 0.0)


@dataclass(frozen=True)
class MarketConfig:
    """One market: population, price map, horizon, and seed."""

    fmap: FeedbackMap
    agents: tuple[AgentSpec, ...]
    horizon: int
    seed: int | tuple[int, ...]
    experiment: str = "experiment"
    treatment: str = "treatment"
    market_id: str = "m01"
    bounds_first: tuple[float, float] = DEFAULT_BOUNDS_FIRST
    bounds_rest: tuple[float, float] = DEFAULT_BOUNDS_REST

    def __post_init__(self) -> None:
        if len(self.agents) < 2:
            raise ValueError("a market needs at least 2 agents")
        if self.horizon < 2:
            raise ValueError("horizon must be >= 2")
        if self.fmap.schedule is not None:
            last = self.fmap.schedule[-1][1]
            if last < self.horizon:
                raise ValueError(
                    f"schedule ends at period {last}, horizon is {self.horizon}"
                )

    def bounds(self, t: int) -> tuple[float, float]:
        return self.bounds_first if t == 1 else self.bounds_rest


@dataclass
class MarketRun:
    """Panel produced by one market plus bookkeeping for inversion checks."""

    config: MarketConfig
    periods: np.ndarray          # (T,)
    prices: np.ndarray           # (T,)
    forecasts: np.ndarray        # (T, n_agents), as submitted
    gains: np.ndarray            # (T, n_agents) gain applied in that period's revision
    subject_ids: tuple[str, ...]
    rule_labels: tuple[str, ...]
    clamp_count: int = 0

    def to_frame(self):
        """Long panel DataFrame with one row per (subject, period)."""
        import pandas as pd

        cfg = self.config
        n = len(self.subject_ids)
        horizon = len(self.periods)
        return pd.DataFrame(
            {
                "experiment": np.repeat(cfg.experiment, n * horizon),
                "treatment": np.repeat(cfg.treatment, n * horizon),
                "market_id": np.repeat(cfg.market_id, n * horizon),
                "subject_id": np.repeat(np.array(self.subject_ids, dtype=object), horizon),
                "period": np.tile(self.periods, n),
                "forecast": self.forecasts.T.reshape(-1),
                "price": np.tile(self.prices, n),
            }
        )

    def metadata(self) -> dict:
        cfg = self.config
        fmap = cfg.fmap
        return {
            "experiment": cfg.experiment,
            "treatment": cfg.treatment,
            "market_id": cfg.market_id,
            "seed": list(cfg.seed) if isinstance(cfg.seed, tuple) else cfg.seed,
            "horizon": cfg.horizon,
            "map": {
                "kind": fmap.kind.value,
                "interest": fmap.interest,
                "dividend": fmap.dividend,
                "slope": fmap.slope,
                "schedule": [list(seg) for seg in fmap.schedule] if fmap.schedule else None,
                "price_noise_sd": fmap.noise_sd,
            },
            "forecast_bounds": [list(cfg.bounds_first), list(cfg.bounds_rest)],
            "rules": {s: r for s, r in zip(self.subject_ids, self.rule_labels)},
            "agents": {
                s: {
                    "gain_init": spec.gain_init,
                    "meta_rate": spec.meta_rate,
                    "threshold": spec.threshold,
                    "forecast_noise_sd": spec.forecast_noise_sd,
                }
                for s, spec in zip(self.subject_ids, cfg.agents)
            },
            "clamped_forecasts": self.clamp_count,
        }


def run_market(config: MarketConfig) -> MarketRun:
    """Simulate one market; deterministic given the config (seed included).

    Each period: collect forecasts (clamped to the period bounds), realize
    the price from the mean forecast plus map noise, then feed the price back
    to every agent.  Every agent draws from its own child generator so the
    result does not depend on evaluation order.
    """
    n = len(config.agents)
    root = np.random.SeedSequence(config.seed)
    children = root.spawn(n + 1)
    market_rng = np.random.Generator(np.random.PCG64(children[0]))
    agents = [
        Agent(spec, np.random.Generator(np.random.PCG64(child)))
        for spec, child in zip(config.agents, children[1:])
    ]

    horizon = config.horizon
    prices = np.empty(horizon)
    forecasts = np.empty((horizon, n))
    gains = np.full((horizon, n), np.nan)
    clamp_count = 0

    for idx in range(horizon):
        t = idx + 1
        fund = fundamental_value(config.fmap, t)
        lo, hi = config.bounds(t)
        for j, agent in enumerate(agents):
            raw = agent.make_forecast(t, fund, (lo, hi))
            submitted = min(max(raw, lo), hi)
            if submitted != raw:
                clamp_count += 1
            agent.accept(submitted)
            forecasts[idx, j] = submitted
            if t > 1 and agent.spec.rule in ADAPTIVE_RULES:
                gains[idx, j] = agent.gain
        mean_forecast = float(forecasts[idx].mean())
        noise = float(market_rng.normal(0.0, config.fmap.noise_sd)) if config.fmap.noise_sd > 0 else 0.0
        price = realize_price(mean_forecast, config.fmap, t, noise)
        prices[idx] = price
        for agent in agents:
            agent.observe(price)

    subject_ids = tuple(f"s{j + 1:02d}" for j in range(n))
    rule_labels = tuple(spec.rule.value for spec in config.agents)
    return MarketRun(
        config=config,
        periods=np.arange(1, horizon + 1),
        prices=prices,
        forecasts=forecasts,
        gains=gains,
        subject_ids=subject_ids,
        rule_labels=rule_labels,
        clamp_count=clamp_count,
    )


def asset_map(noise_sd: float = 1.0, interest: float = 0.05, dividend: float = 3.3) -> FeedbackMap:
    """Asset-pricing map with fundamental dividend/interest (66 by default)."""
    return FeedbackMap(kind=MapKind.ASSET_PRICING, interest=interest, dividend=dividend, noise_sd=noise_sd)


def linear_map(slope: float, fundamental, horizon: int, noise_sd: float = 1.0) -> FeedbackMap:
    """Linear feedback map around a fundamental.

    ``fundamental`` is a constant or a ready-made schedule tuple; a constant
    is expanded to a single segment covering ``1..horizon``.
    """
    if isinstance(fundamental, (int, float)):
        schedule = ((1, horizon, float(fundamental)),)
    else:
        schedule = tuple(fundamental)
    kind = MapKind.LINEAR_POSITIVE if slope > 0 else MapKind.LINEAR_NEGATIVE
    return FeedbackMap(kind=kind, slope=slope, schedule=schedule, noise_sd=noise_sd)
