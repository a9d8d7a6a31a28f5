"""Forecasting rules for learning-to-forecast market agents.

Each rule maps the history of realized prices and own forecasts to a point
forecast for the next period.  The adaptive family (constant-gain, always-on
gain adaptation, and gain adaptation with a satisficing threshold) shares one
stepping function; autocorrelation-based and fundamentalist rules are
stateless formulas over the price history.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

from scipy.special import expit, logit

#: Widest gain-parameter range where the sigmoid stays strictly inside (0, 1)
#: in double precision; beyond ~36.7 expit saturates to exactly 1.0.
GAIN_PARAM_LIMIT = 36.0


class Rule(str, Enum):
    """Supported forecasting rules."""

    ADA = "ada"                      # constant-gain adaptive rule
    RMBL = "rmbl"                    # adaptive gain with satisficing threshold
    IDBD = "idbd"                    # adaptive gain, no threshold
    SAC = "sac"                      # sample-autocorrelation rule
    LEAST_SQUARES = "least_squares"  # recursive AR(1) regression rule
    FUNDAMENTALIST = "fundamentalist"


#: Rules whose forecast revision is gain times the last prediction error.
ADAPTIVE_RULES = frozenset({Rule.ADA, Rule.RMBL, Rule.IDBD})


@dataclass(frozen=True)
class AgentSpec:
    """Immutable parameterization of one forecasting agent.

    Parameters
    ----------
    rule : Rule
    gain_init : float
        Initial adaptive gain, in (0, 1).
    meta_rate : float
        Step size of the gradient update on the gain parameter.  Must be 0
        for ADA (its gain never moves).
    threshold : float
        Squared-error satisficing threshold: the gain only moves when the
        squared prediction error exceeds it.  Must be 0 for IDBD.
    forecast_noise_sd : float
        Standard deviation of mean-zero Gaussian noise added to each rule
        forecast from period 2 on.  Zero disables it.
    initial_forecast : float or None
        Period-1 forecast.  None means drawn uniformly from the period-1
        bounds by the market simulator.
    """

    rule: Rule
    gain_init: float = 0.5
    meta_rate: float = 0.0
    threshold: float = 0.0
    forecast_noise_sd: float = 0.25
    initial_forecast: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "rule", Rule(self.rule))
        if not 0.0 < self.gain_init < 1.0:
            raise ValueError(f"gain_init must be in (0, 1), got {self.gain_init}")
        if self.meta_rate < 0.0:
            raise ValueError("meta_rate must be >= 0")
        if self.threshold < 0.0:
            raise ValueError("threshold must be >= 0")
        if self.forecast_noise_sd < 0.0:
            raise ValueError("forecast_noise_sd must be >= 0")
        if self.rule is Rule.ADA and self.meta_rate != 0.0:
            raise ValueError("ADA has a constant gain; meta_rate must be 0")
        if self.rule is Rule.IDBD and self.threshold != 0.0:
            raise ValueError("IDBD has no satisficing threshold; threshold must be 0")


@dataclass
class AgentState:
    """Evolving state of an adaptive agent.

    The gain is stored as an unconstrained parameter ``gain_param`` and read
    through a sigmoid, so the effective gain always stays in (0, 1) without
    clipping.  ``last_error`` is the most recent realized prediction error,
    ``prev_error`` the one before it; both are None until observed.
    """

    gain_param: float
    last_forecast: float
    last_error: float | None = None
    prev_error: float | None = None
    history: list[float] = field(default_factory=list)

    @property
    def gain(self) -> float:
        """Effective adaptive gain, sigmoid of the unconstrained parameter."""
        return float(expit(self.gain_param))


def initial_state(spec: AgentSpec, first_forecast: float) -> AgentState:
    return AgentState(
        gain_param=float(logit(spec.gain_init)), last_forecast=first_forecast
    )


def ada_forecast(prev_forecast: float, last_price: float, gain_const: float) -> float:
    """Constant-gain adaptive forecast: revise by a fixed fraction of the error."""
    if not 0.0 < gain_const < 1.0:
        raise ValueError(f"gain_const must be in (0, 1), got {gain_const}")
    return prev_forecast + gain_const * (last_price - prev_forecast)


def omega(error: float, threshold: float) -> float:
    """Excess squared error over the satisficing threshold."""
    if threshold < 0.0:
        raise ValueError("threshold must be >= 0")
    return error * error - threshold


def gain_gradient(omega_val: float, e_t: float, e_tm1: float) -> float:
    """Signed drive on the gain: ``4 * omega * e_t * e_tm1``.

    Positive means the gain should rise (two same-signed errors while the
    excess error is positive: adaptation was too timid), negative that it
    should fall.  This is the negative of the raw derivative of the squared
    excess error with respect to the gain, whose inner step d(e_t)/dG
    contributes a minus sign; the sign here is chosen so that following the
    returned direction reduces the excess error.
    """
    return 4.0 * omega_val * e_t * e_tm1


def rmbl_step(
    state: AgentState,
    realized_price: float,
    spec: AgentSpec,
    noise: float = 0.0,
) -> tuple[float, AgentState]:
    """Advance an adaptive-gain agent one period and emit its next forecast.

    Computes the realized error ``e_t``, moves the gain parameter along
    :func:`gain_gradient` (scaled through the sigmoid's slope) when the
    squared error exceeds the threshold and two consecutive errors are
    available and nonzero, then forecasts with the updated gain.

    Returns the next forecast (with ``noise`` added) and the new state.
    The input state is not mutated.
    """
    if spec.rule not in (Rule.RMBL, Rule.IDBD):
        raise ValueError(f"rmbl_step applies to RMBL/IDBD, got {spec.rule}")
    return _adaptive_step(state, realized_price, spec, noise)


def _adaptive_step(
    state: AgentState, realized_price: float, spec: AgentSpec, noise: float
) -> tuple[float, AgentState]:
    # Shared by ADA (meta_rate 0) and RMBL/IDBD.
    e_t = realized_price - state.last_forecast
    gain_param = state.gain_param
    if (
        spec.meta_rate > 0.0
        and state.last_error is not None
        and e_t != 0.0
        and state.last_error != 0.0
    ):
        om = omega(e_t, spec.threshold)
        if om > 0.0:
            g = expit(gain_param)
            gain_param += (
                spec.meta_rate
                * gain_gradient(om, e_t, state.last_error)
                * g
                * (1.0 - g)
            )
            gain_param = min(GAIN_PARAM_LIMIT, max(-GAIN_PARAM_LIMIT, gain_param))
    g_new = float(expit(gain_param))
    forecast = state.last_forecast + g_new * e_t + noise
    new_state = AgentState(
        gain_param=float(gain_param),
        last_forecast=forecast,
        last_error=e_t,
        prev_error=state.last_error,
        history=state.history + [realized_price],
    )
    return forecast, new_state


def sac_forecast(price_history: list[float]) -> float:
    """Forecast from the running mean plus first-order autocorrelation.

    Returns ``alpha + rho1 * (p_last - alpha)`` where ``alpha`` is the mean
    of the history and ``rho1`` the first-order sample autocorrelation
    coefficient.  ``rho1`` is 0 for histories shorter than 3 or with zero
    variance.
    """
    if not price_history:
        raise ValueError("price_history must contain at least one price")
    n = len(price_history)
    alpha = math.fsum(price_history) / n
    rho1 = 0.0
    if n >= 3:
        c0 = math.fsum((p - alpha) ** 2 for p in price_history) / n
        if c0 > 0.0:
            c1 = (
                math.fsum(
                    (price_history[t] - alpha) * (price_history[t + 1] - alpha)
                    for t in range(n - 1)
                )
                / n
            )
            rho1 = c1 / c0
    return alpha + rho1 * (price_history[-1] - alpha)


def ar1_slope(price_history: list[float]) -> float:
    """Least-squares slope of each price on its predecessor.

    Slope of ``p_i`` on ``p_{i-1}`` with each side centered on the mean of
    the observations it contributes; 0 when fewer than two observations or
    when the lagged prices have no variance.
    """
    n = len(price_history)
    if n < 2:
        return 0.0
    xs = price_history[:-1]
    ys = price_history[1:]
    xbar = math.fsum(xs) / len(xs)
    ybar = math.fsum(ys) / len(ys)
    den = math.fsum((x - xbar) ** 2 for x in xs)
    if den == 0.0:
        return 0.0
    num = math.fsum((x - xbar) * (y - ybar) for x, y in zip(xs, ys))
    return num / den


def least_squares_forecast(price_history: list[float]) -> float:
    """Forecast from the running mean plus the AR(1) regression slope."""
    if not price_history:
        raise ValueError("price_history must contain at least one price")
    alpha = math.fsum(price_history) / len(price_history)
    beta = ar1_slope(price_history)
    return alpha + beta * (price_history[-1] - alpha)


class Agent:
    """Stateful wrapper driving one agent through a market run.

    The market calls, in order each period: :meth:`make_forecast`, then
    :meth:`accept` with the (possibly clamped) submitted value, then
    :meth:`observe` with the realized price.  All randomness comes from the
    generator handed in by the market, so runs are reproducible.
    """

    def __init__(self, spec: AgentSpec, rng) -> None:
        self.spec = spec
        self.rng = rng
        self.state: AgentState | None = None
        self._pending: float | None = None

    def make_forecast(self, period: int, fundamental: float, bounds: tuple[float, float]) -> float:
        spec = self.spec
        if period == 1:
            if spec.initial_forecast is not None:
                return float(spec.initial_forecast)
            if spec.rule is Rule.FUNDAMENTALIST:
                return fundamental
            lo, hi = bounds
            return float(self.rng.uniform(lo, hi))
        if spec.rule in ADAPTIVE_RULES:
            assert self._pending is not None
            return self._pending
        if spec.rule is Rule.SAC:
            value = sac_forecast(self.state.history)
        elif spec.rule is Rule.LEAST_SQUARES:
            value = least_squares_forecast(self.state.history)
        elif spec.rule is Rule.FUNDAMENTALIST:
            value = fundamental
        else:  # pragma: no cover
            raise AssertionError(spec.rule)
        return value + self._draw_noise()

    def accept(self, submitted: float) -> None:
        """Record the forecast as actually submitted (after clamping)."""
        if self.state is None:
            self.state = initial_state(self.spec, submitted)
        else:
            self.state.last_forecast = submitted

    def observe(self, price: float) -> None:
        """Ingest the realized price; prepares the next rule forecast."""
        spec = self.spec
        if spec.rule in ADAPTIVE_RULES:
            noise = self._draw_noise()
            if spec.rule is Rule.ADA:
                e_t = price - self.state.last_forecast
                forecast = ada_forecast(self.state.last_forecast, price, spec.gain_init) + noise
                self.state = AgentState(
                    gain_param=self.state.gain_param,
                    last_forecast=forecast,
                    last_error=e_t,
                    prev_error=self.state.last_error,
                    history=self.state.history + [price],
                )
            else:
                forecast, self.state = _adaptive_step(self.state, price, spec, noise)
            self._pending = forecast
        else:
            self.state.history.append(price)

    def _draw_noise(self) -> float:
        sd = self.spec.forecast_noise_sd
        return float(self.rng.normal(0.0, sd)) if sd > 0.0 else 0.0

    @property
    def gain(self) -> float:
        """Gain that multiplies the error in the upcoming forecast revision."""
        if self.spec.rule is Rule.ADA:
            return self.spec.gain_init
        if self.spec.rule in ADAPTIVE_RULES:
            return self.state.gain
        return float("nan")


def make_population(
    rule: Rule,
    n_agents: int,
    *,
    gain_init: float = 0.5,
    meta_rate: float = 0.1,
    threshold: float | None = None,
    threshold_range: tuple[float, float] = (0.25, 4.0),
    forecast_noise_sd: float = 0.25,
    initial_forecast: float | None = None,
    rng=None,
) -> tuple[AgentSpec, ...]:
    """Build a homogeneous-rule population of agent specs.

    RMBL agents with no explicit ``threshold`` draw one each, uniformly from
    ``threshold_range`` (thresholds are heterogeneous across people and must
    be positive for a satisficing learner).  ``rng`` is required in that case.
    """
    specs = []
    for _ in range(n_agents):
        if rule is Rule.RMBL and threshold is None:
            if rng is None:
                raise ValueError("rng required to draw RMBL thresholds")
            lo, hi = threshold_range
            z = float(rng.uniform(lo, hi))
        elif rule is Rule.RMBL:
            z = float(threshold)
        else:
            z = 0.0
        specs.append(
            AgentSpec(
                rule=rule,
                gain_init=gain_init,
                meta_rate=meta_rate if rule in (Rule.RMBL, Rule.IDBD) else 0.0,
                threshold=z,
                forecast_noise_sd=forecast_noise_sd,
                initial_forecast=initial_forecast,
            )
        )
    return tuple(specs)
