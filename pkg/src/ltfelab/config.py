"""Run configuration: flat key = value files with one section per market.

Example::

    [run]
    seed = 20240511
    alpha = 0.05
    huber_tuning = 1.345
    variants = binary-continuous, binary-discrete

    [market:neg]
    experiment = demo
    treatment = negative
    kind = linear_negative
    slope = -0.952380952380952
    fundamental = 56@1-20, 41@21-43, 62@44-50
    price_noise_sd = 1.0
    horizon = 50
    n_agents = 6
    replicas = 10
    rule = rmbl
    gain_init = 0.5
    meta_rate = 0.1
    threshold = uniform:0.25:4.0
    forecast_noise_sd = 0.25
    initial_forecast = uniform

``fundamental`` is a constant or ``value@first-last`` segments; ``threshold``
is a number or ``uniform:lo:hi`` drawn once per agent; ``initial_forecast``
is a number or ``uniform`` (drawn from the period-1 bounds).
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classify import VARIANTS
from .market import MarketConfig, asset_map, linear_map
from .rules import AgentSpec, Rule


@dataclass(frozen=True)
class MarketBlock:
    """One ``[market:...]`` section: a family of identically configured markets."""

    name: str
    experiment: str
    treatment: str
    kind: str
    horizon: int
    n_agents: int
    rule: Rule
    replicas: int = 1
    slope: float | None = None
    fundamental: str = "66"
    interest: float = 0.05
    dividend: float = 3.3
    price_noise_sd: float = 1.0
    gain_init: float = 0.5
    meta_rate: float = 0.1
    threshold: str = "uniform:0.25:4.0"
    forecast_noise_sd: float = 0.25
    initial_forecast: str = "uniform"

    def __post_init__(self) -> None:
        object.__setattr__(self, "rule", Rule(self.rule))


@dataclass
class RunConfig:
    """Everything a pipeline run needs besides the output directory."""

    seed: int = 0
    alpha: float = 0.05
    huber_tuning: float = 1.345
    variants: tuple[str, ...] = VARIANTS
    markets: tuple[MarketBlock, ...] = field(default_factory=tuple)


def parse_schedule(text: str) -> object:
    """Parse ``value`` or ``value@first-last`` segments into a schedule."""
    text = text.strip()
    if "@" not in text:
        return float(text)
    segments = []
    for part in text.split(","):
        value_s, span = part.strip().split("@")
        first_s, last_s = span.split("-")
        segments.append((int(first_s), int(last_s), float(value_s)))
    return tuple(segments)


def load_config(path) -> RunConfig:
    parser = configparser.ConfigParser()
    read = parser.read(Path(path))
    if not read:
        raise FileNotFoundError(f"config file not found: {path}")

    seed = 0
    alpha = 0.05
    huber_tuning = 1.345
    variants: tuple[str, ...] = VARIANTS
    if parser.has_section("run"):
        run = parser["run"]
        seed = run.getint("seed", fallback=0)
        alpha = run.getfloat("alpha", fallback=0.05)
        huber_tuning = run.getfloat("huber_tuning", fallback=1.345)
        if "variants" in run:
            variants = tuple(v.strip() for v in run["variants"].split(",") if v.strip())
            unknown = [v for v in variants if v not in VARIANTS]
            if unknown:
                raise ValueError(f"unknown analysis variants: {unknown}")

    markets = []
    for section in parser.sections():
        if not section.startswith("market:"):
            continue
        sec = parser[section]
        name = section.split(":", 1)[1]
        for key in ("kind", "horizon", "n_agents", "rule"):
            if key not in sec:
                raise ValueError(f"[{section}] is missing required key {key!r}")
        markets.append(
            MarketBlock(
                name=name,
                experiment=sec.get("experiment", fallback=name),
                treatment=sec.get("treatment", fallback=name),
                kind=sec["kind"].strip(),
                horizon=sec.getint("horizon"),
                n_agents=sec.getint("n_agents"),
                rule=Rule(sec["rule"].strip()),
                replicas=sec.getint("replicas", fallback=1),
                slope=sec.getfloat("slope", fallback=None),
                fundamental=sec.get("fundamental", fallback="66"),
                interest=sec.getfloat("interest", fallback=0.05),
                dividend=sec.getfloat("dividend", fallback=3.3),
                price_noise_sd=sec.getfloat("price_noise_sd", fallback=1.0),
                gain_init=sec.getfloat("gain_init", fallback=0.5),
                meta_rate=sec.getfloat("meta_rate", fallback=0.1),
                threshold=sec.get("threshold", fallback="uniform:0.25:4.0"),
                forecast_noise_sd=sec.getfloat("forecast_noise_sd", fallback=0.25),
                initial_forecast=sec.get("initial_forecast", fallback="uniform"),
            )
        )
    return RunConfig(
        seed=seed, alpha=alpha, huber_tuning=huber_tuning,
        variants=variants, markets=tuple(markets),
    )


def _agent_specs(block: MarketBlock, rng: np.random.Generator) -> tuple[AgentSpec, ...]:
    threshold_text = block.threshold.strip()
    init_text = block.initial_forecast.strip()
    initial = None if init_text == "uniform" else float(init_text)
    specs = []
    for _ in range(block.n_agents):
        if block.rule is Rule.RMBL:
            if threshold_text.startswith("uniform:"):
                _, lo, hi = threshold_text.split(":")
                z = float(rng.uniform(float(lo), float(hi)))
            else:
                z = float(threshold_text)
        else:
            z = 0.0
        specs.append(
            AgentSpec(
                rule=block.rule,
                gain_init=block.gain_init,
                meta_rate=block.meta_rate if block.rule in (Rule.RMBL, Rule.IDBD) else 0.0,
                threshold=z,
                forecast_noise_sd=block.forecast_noise_sd,
                initial_forecast=initial,
            )
        )
    return tuple(specs)


def market_configs(cfg: RunConfig) -> list[MarketConfig]:
    """Expand the config blocks into per-market configs with derived seeds."""
    configs = []
    for b_idx, block in enumerate(cfg.markets):
        for r in range(block.replicas):
            draw_rng = np.random.Generator(
                np.random.PCG64(np.random.SeedSequence([cfg.seed, b_idx, r, 7]))
            )
            if block.kind == "asset_pricing":
                fmap = asset_map(noise_sd=block.price_noise_sd,
                                 interest=block.interest, dividend=block.dividend)
            elif block.kind in ("linear_positive", "linear_negative"):
                if block.slope is None:
                    raise ValueError(f"market {block.name!r}: linear kind needs a slope")
                fmap = linear_map(
                    block.slope,
                    parse_schedule(block.fundamental),
                    block.horizon,
                    noise_sd=block.price_noise_sd,
                )
            else:
                raise ValueError(f"market {block.name!r}: unknown kind {block.kind!r}")
            configs.append(
                MarketConfig(
                    fmap=fmap,
                    agents=_agent_specs(block, draw_rng),
                    horizon=block.horizon,
                    seed=(cfg.seed, b_idx, r),
                    experiment=block.experiment,
                    treatment=block.treatment,
                    market_id=f"{block.name}-{r + 1:02d}",
                )
            )
    return configs
