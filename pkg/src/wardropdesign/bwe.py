"""Bayesian Wardrop equilibria of a game extended with an information structure."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .auxiliary import AuxiliaryGame, build_auxiliary
from .descent import SUPPORT_THRESHOLD, DescentConfig, minimize_potential
from .errors import ConsistencyError, UnsupportedModelError
from .model import CongestionGame, ConvexityClass, FiniteOutcome, classify_potential
from .structure import InformationStructure, InterimFlowProfile

OUTCOME_MERGE_TOL = 1e-9
IDENTITY_TOL = 1e-9


@dataclass(frozen=True)
class InterimCostReport:
    """Conditional expected costs per block and the resulting epsilon.

    ``costs`` rows of excluded (zero-probability) blocks are NaN.  ``eps`` is
    the normalized slack; ``eps_weighted`` multiplies each block's slack by
    the probability of its type before maximizing.
    """

    keys: list
    actions: tuple
    costs: np.ndarray
    type_prob: np.ndarray
    slacks: np.ndarray
    excluded: list
    eps: float
    eps_weighted: float

    def certified(self, tol):
        return self.eps <= tol

    def cost(self, k, t, a):
        return float(self.costs[self.keys.index((int(k), str(t))), self.actions.index(a)])


def profile_matrix(game: CongestionGame, aux: AuxiliaryGame, profile: InterimFlowProfile):
    """Profile flows as a (blocks x actions) array in the auxiliary game's order."""
    if profile.keys != aux.block_keys:
        raise ConsistencyError("profile blocks do not match the structure")
    if set(profile.actions) != set(game.action_labels):
        raise ConsistencyError(f"profile actions {profile.actions} differ from game actions")
    cols = [profile.actions.index(a) for a in game.action_labels]
    Y = profile.flows[:, cols]
    if not np.allclose(Y.sum(axis=1), aux.block_mass, rtol=0, atol=1e-10):
        raise ConsistencyError("profile masses do not match the population sizes")
    return Y


def interim_report(aux, Y):
    C = aux.block_costs(Y)
    act = aux.active
    costs = np.full_like(C, np.nan)
    costs[act] = C[act] / aux.type_prob[act, None]
    slacks = np.zeros(aux.n_blocks)
    weighted = 0.0
    for b in np.flatnonzero(act):
        sup = Y[b] > SUPPORT_THRESHOLD
        s = float(np.max(costs[b, sup]) - np.min(costs[b]))
        slacks[b] = max(0.0, s)
        weighted = max(weighted, slacks[b] * aux.type_prob[b])
    excluded = [aux.block_keys[b] for b in np.flatnonzero(~act)]
    return InterimCostReport(
        aux.block_keys, aux.game.action_labels, costs, aux.type_prob.copy(), slacks, excluded,
        float(slacks.max(initial=0.0)), float(weighted),
    )


def verify_eps_bwe(game: CongestionGame, structure: InformationStructure, profile: InterimFlowProfile,
                   aux: AuxiliaryGame | None = None) -> InterimCostReport:
    aux = aux or build_auxiliary(game, structure)
    return interim_report(aux, profile_matrix(game, aux, profile))


def profile_from_flows(aux, Y):
    return InterimFlowProfile(aux.block_keys, aux.block_mass, Y, aux.game.action_labels)


def bwe_descent(game, structure, config: DescentConfig | None = None, aux=None, start=None):
    """Run potential descent on the auxiliary game; returns ``(aux, DescentResult)``."""
    if classify_potential(game) is ConvexityClass.NON_CONVEX:
        raise UnsupportedModelError("the game has no convex potential; potential descent is not supported")
    aux = aux or build_auxiliary(game, structure)
    return aux, minimize_potential(aux, config, start=start)


def solve_bwe(game: CongestionGame, structure: InformationStructure, config: DescentConfig | None = None) -> InterimFlowProfile:
    """A Bayesian Wardrop equilibrium found by minimizing the auxiliary potential."""
    aux, res = bwe_descent(game, structure, config)
    return profile_from_flows(aux, res.flows)


def project_outcome(structure: InformationStructure, profile: InterimFlowProfile) -> FiniteOutcome:
    """Distribution of total flows in each state induced by the signal law."""
    if not profile.matches(structure):
        raise ConsistencyError("profile blocks do not match the structure")
    index = {key: i for i, key in enumerate(profile.keys)}
    per_state = {}
    for s in structure.states:
        atoms = []
        for prof, p in structure.profiles(s):
            if p <= 0:
                continue
            rows = [index[(k, t)] for k, t in enumerate(prof)]
            atoms.append((profile.flows[rows].sum(axis=0), p))
        per_state[s] = atoms
    return FiniteOutcome.from_atoms(per_state, merge_tol=OUTCOME_MERGE_TOL)


@dataclass(frozen=True)
class TotalCostReport:
    total_cost: float
    expected_social_cost: float

    @property
    def discrepancy(self):
        return abs(self.total_cost - self.expected_social_cost)


def total_cost_report(game, structure, profile, aux=None) -> TotalCostReport:
    aux = aux or build_auxiliary(game, structure)
    Y = profile_matrix(game, aux, profile)
    F = aux.total_flows(Y)
    tc = float(np.sum(Y * aux.block_costs(Y, F)))
    esc = aux.expected_social_cost(Y, F)
    rep = TotalCostReport(tc, esc)
    if rep.discrepancy > IDENTITY_TOL:
        raise ConsistencyError(f"total cost {tc!r} differs from expected social cost {esc!r}")
    return rep


def total_cost(game: CongestionGame, structure: InformationStructure, profile: InterimFlowProfile) -> float:
    """Interim total cost; checked against the ex ante expected social cost."""
    return total_cost_report(game, structure, profile).total_cost


__all__ = [
    "InterimCostReport", "TotalCostReport", "verify_eps_bwe", "solve_bwe", "bwe_descent",
    "project_outcome", "total_cost", "total_cost_report", "profile_matrix",
    "profile_from_flows", "interim_report",
]
