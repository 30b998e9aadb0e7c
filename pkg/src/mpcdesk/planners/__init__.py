"""Planner registry: three interchangeable plan-improvement strategies."""

from __future__ import annotations

from .base import Planner, PlanResult
from .gradient import GradientConfig, GradientPlanner
from .ilqg import ILQGConfig, ILQGPlanner
from .sampling import SamplingConfig, SamplingPlanner

PLANNER_KINDS = ("sampling", "gradient", "ilqg")

_CONFIGS = {
    "sampling": SamplingConfig,
    "gradient": GradientConfig,
    "ilqg": ILQGConfig,
}

_PLANNERS = {
    "sampling": SamplingPlanner,
    "gradient": GradientPlanner,
    "ilqg": ILQGPlanner,
}


def make_config(kind: str, **settings):
    """Build the config dataclass for a planner kind from plain kwargs."""
    try:
        cls = _CONFIGS[kind]
    except KeyError:
        raise ValueError(f"unknown planner kind {kind!r}; know {PLANNER_KINDS}") from None
    return cls(**settings)


def make_planner(kind: str, config=None, **settings) -> Planner:
    """Instantiate a planner by kind, building its config if not given."""
    if config is None:
        config = make_config(kind, **settings)
    return _PLANNERS[kind](config)


__all__ = [
    "Planner",
    "PlanResult",
    "PLANNER_KINDS",
    "SamplingConfig",
    "SamplingPlanner",
    "GradientConfig",
    "GradientPlanner",
    "ILQGConfig",
    "ILQGPlanner",
    "make_config",
    "make_planner",
]
