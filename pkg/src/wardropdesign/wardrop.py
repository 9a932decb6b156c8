"""Complete-information Wardrop equilibria, state by state and for the average game."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .auxiliary import complete_information
from .descent import SUPPORT_THRESHOLD, DescentConfig, DescentResult, minimize_potential
from .errors import UnsupportedModelError
from .model import (
    CongestionGame,
    ConvexityClass,
    FlowProfile,
    as_unit_flow,
    classify_potential,
)


@dataclass(frozen=True)
class EquilibriumGapReport:
    """Per supported action: its cost, the cheapest alternative, and the slack."""

    supported: tuple
    costs: np.ndarray
    min_cost: float
    slacks: dict
    gap: float

    def certified(self, tol):
        return self.gap <= tol


def verify_wardrop(game: CongestionGame, flow, state, tol: float = 1e-8) -> EquilibriumGapReport:
    y = as_unit_flow(flow, game.n_actions)
    c = game.action_costs(y, state)
    supported = tuple(int(a) for a in np.flatnonzero(y > SUPPORT_THRESHOLD))
    cmin = float(c.min())
    slacks = {game.action_labels[a]: float(c[a] - cmin) for a in supported}
    gap = max([0.0, *slacks.values()])
    return EquilibriumGapReport(supported, c, cmin, slacks, gap)


def _require_convex(game, what="game"):
    if classify_potential(game) is ConvexityClass.NON_CONVEX:
        raise UnsupportedModelError(f"the {what} has no convex potential; potential descent is not supported")


def wardrop_descent(game: CongestionGame, state, config: DescentConfig | None = None) -> DescentResult:
    _require_convex(game)
    return minimize_potential(complete_information(game, state), config)


def solve_wardrop(game: CongestionGame, state, config: DescentConfig | None = None) -> FlowProfile:
    """Wardrop equilibrium of the complete-information game in ``state``."""
    res = wardrop_descent(game, state, config)
    return FlowProfile.unit(res.flows[0])


def average_wardrop_descent(game: CongestionGame, config: DescentConfig | None = None) -> DescentResult:
    avg = game.average_game()
    # the average game may be convex even when some state is not
    _require_convex(avg, "average game")
    return minimize_potential(complete_information(avg, 0), config)


def solve_average_wardrop(game: CongestionGame, config: DescentConfig | None = None) -> FlowProfile:
    """Wardrop equilibrium of the game with prior-averaged costs."""
    res = average_wardrop_descent(game, config)
    return FlowProfile.unit(res.flows[0])
