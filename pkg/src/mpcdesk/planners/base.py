"""Shared planner-facing types.

Every planner exposes the same surface to the agent loop: take the
current plan and a measured state, return an improved plan plus the
diagnostics the telemetry stream wants. Planners differ in how the
candidate set is generated, not in this contract.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np

from ..costs import CostSpec
from ..models import Model, SimState
from ..rollout import Rollout
from ..splines import SplinePlan


@dataclass
class PlanResult:
    """Outcome of one improvement iteration."""

    plan: SplinePlan
    rollout: Rollout
    objective: float
    nominal_objective: float
    candidate_objectives: np.ndarray = field(
        default_factory=lambda: np.empty(0)
    )

    @property
    def improved(self) -> bool:
        return self.objective < self.nominal_objective


@runtime_checkable
class Planner(Protocol):
    """Anything the agent can drive: improve(plan, state) -> PlanResult."""

    kind: str
    horizon: int

    def improve(
        self, plan: SplinePlan, state: SimState, model: Model, cost: CostSpec
    ) -> PlanResult:
        ...
