"""Bayes correlated Wardrop equilibria: obedience checks, canonical equilibria, and
linear-programming optimization over grid-supported outcomes."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from math import comb
from typing import Callable, Mapping

import numpy as np

from .descent import DescentConfig
from .errors import ConsistencyError, DomainError
from .model import CongestionGame, FiniteOutcome, FlowProfile
from .simplex import linprog_bland
from .wardrop import solve_average_wardrop, solve_wardrop

log = logging.getLogger(__name__)

ATOM_PRUNE = 1e-12


@dataclass(frozen=True)
class ObedienceReport:
    """``lhs[a, b]``: expected y_a c_a; ``rhs[a, b]``: expected y_a c_b."""

    actions: tuple
    lhs: np.ndarray
    rhs: np.ndarray

    @property
    def slack(self):
        return self.rhs - self.lhs

    @property
    def violation(self):
        return float(max(0.0, -self.slack.min()))

    def certified(self, tol):
        return self.violation <= tol

    def pair(self, a, b):
        i, j = self.actions.index(a), self.actions.index(b)
        return float(self.lhs[i, j]), float(self.rhs[i, j])


def verify_bcwe(game: CongestionGame, outcome: FiniteOutcome, tol: float = 1e-8) -> ObedienceReport:
    outcome.check_game(game)
    A = game.n_actions
    lhs = np.zeros((A, A))
    rhs = np.zeros((A, A))
    for s, atoms in outcome.per_state.items():
        ps = game.prior[game.state_index(s)]
        for f, prob in atoms:
            y = f.entries
            c = game.action_costs(y, s)
            w = ps * prob * y
            lhs += (w * c)[:, None]
            rhs += np.outer(w, c)
    return ObedienceReport(game.action_labels, lhs, rhs)


class FlowGrid:
    """All flows with entries k/D, as integer count vectors in lexicographic order."""

    def __init__(self, denominator: int, n_actions: int):
        if denominator < 1:
            raise DomainError("grid denominator must be a positive integer")
        self.denominator = int(denominator)
        self.n_actions = int(n_actions)
        self.counts = np.array(list(_compositions(self.denominator, self.n_actions)), dtype=np.int64)
        self.points = self.counts / self.denominator
        assert len(self.counts) == comb(self.denominator + self.n_actions - 1, self.n_actions - 1)

    def __len__(self):
        return len(self.counts)


def _compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first, *rest)


def _objective_values(game, objective, grid):
    """psi(y, theta) on the grid, shape (states, points)."""
    pts = grid.points
    if isinstance(objective, str):
        if objective not in ("social_cost", "neg_social_cost"):
            raise DomainError(f"unknown objective {objective!r}")
        vals = np.array([game.social_costs(pts, s) for s in game.states])
        return vals if objective == "social_cost" else -vals
    if callable(objective):
        return np.array([[float(objective(y, s)) for y in pts] for s in game.states])
    if isinstance(objective, Mapping):
        vals = np.array([np.asarray(objective[s], dtype=float) for s in game.states])
        if vals.shape != (len(game.states), len(grid)):
            raise DomainError(f"objective table has shape {vals.shape}, grid needs {(len(game.states), len(grid))}")
        return vals
    raise DomainError(f"unsupported objective {objective!r}")


def optimize_bcwe(
    game: CongestionGame,
    objective: str | Callable | Mapping = "social_cost",
    grid: FlowGrid | int = 6,
):
    """Minimize the expected objective over BCWE supported on ``grid``.

    ``objective`` is ``"social_cost"``, ``"neg_social_cost"``, a callable
    ``psi(flow, state)`` or a mapping ``state -> values aligned with grid``.
    Returns ``(outcome, value)``.
    """
    if isinstance(grid, int):
        grid = FlowGrid(grid, game.n_actions)
    if grid.n_actions != game.n_actions:
        raise DomainError("grid dimension does not match the number of actions")
    S, G, A = len(game.states), len(grid), game.n_actions
    psi = _objective_values(game, objective, grid)
    costs = np.array([game.action_costs(grid.points, s) for s in game.states])  # S x G x A

    c = (game.prior[:, None] * psi).ravel()
    rows = []
    for a, b in itertools.permutations(range(A), 2):
        coef = game.prior[:, None] * grid.points[None, :, a] * (costs[:, :, a] - costs[:, :, b])
        rows.append(coef.ravel())
    A_ub = np.array(rows) if rows else None
    b_ub = np.zeros(len(rows)) if rows else None
    A_eq = np.zeros((S, S * G))
    for s in range(S):
        A_eq[s, s * G:(s + 1) * G] = 1.0
    res = linprog_bland(c, A_ub, b_ub, A_eq, np.ones(S))
    log.info("grid LP: %d variables, %d pivots, value %.12g", S * G, res.pivots, res.value)

    mu = res.x.reshape(S, G)
    per_state = {}
    for si, s in enumerate(game.states):
        keep = np.flatnonzero(mu[si] >= ATOM_PRUNE)
        probs = mu[si, keep] / mu[si, keep].sum()
        per_state[s] = [(FlowProfile.unit(grid.points[g]), float(p)) for g, p in zip(keep, probs)]
    outcome = FiniteOutcome(per_state)
    report = verify_bcwe(game, outcome)
    if not report.certified(1e-8):
        raise ConsistencyError(f"LP solution violates obedience by {report.violation:.3e}")
    return outcome, res.value


def fully_revealing_bcwe(game: CongestionGame, config: DescentConfig | None = None) -> FiniteOutcome:
    """Point mass on the complete-information Wardrop equilibrium of each state."""
    config = config or DescentConfig()
    out = FiniteOutcome.point_masses({s: solve_wardrop(game, s, config) for s in game.states})
    _check(game, out, 10 * config.target_gap)
    return out


def non_revealing_bcwe(game: CongestionGame, config: DescentConfig | None = None) -> FiniteOutcome:
    """Point mass on the average-game Wardrop equilibrium in every state."""
    config = config or DescentConfig()
    y = solve_average_wardrop(game, config)
    out = FiniteOutcome.point_masses({s: y for s in game.states})
    _check(game, out, 10 * config.target_gap)
    return out


def _check(game, outcome, tol):
    rep = verify_bcwe(game, outcome)
    if not rep.certified(tol):
        raise ConsistencyError(f"constructed outcome violates obedience by {rep.violation:.3e}")
