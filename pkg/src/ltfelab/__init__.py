"""Learning-to-forecast market simulation and learning-rule identification.

The package simulates forecast panels from adaptive learning rules inside
positive- and negative-feedback market environments, derives the revealed
gain and its companions from any forecast/price panel, estimates the
learning-speed regressions with panel fixed effects, and classifies which
rule generated the data.
"""

from .classify import Classification, classify_continuous, classify_discrete
from .derive import PanelObservation, derive_panel
from .econometrics import DesignSpec, FitResult, LinearComboTest
from .market import FeedbackMap, MarketConfig, MarketRun, payoff, run_market
from .rules import Agent, AgentSpec, AgentState, Rule, make_population

__version__ = "0.1.0"

__all__ = [
    "Agent",
    "AgentSpec",
    "AgentState",
    "Classification",
    "DesignSpec",
    "FeedbackMap",
    "FitResult",
    "LinearComboTest",
    "MarketConfig",
    "MarketRun",
    "PanelObservation",
    "Rule",
    "classify_continuous",
    "classify_discrete",
    "derive_panel",
    "make_population",
    "payoff",
    "run_market",
    "__version__",
]
