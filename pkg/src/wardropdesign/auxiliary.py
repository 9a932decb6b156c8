"""The complete-information multi-population game attached to (game, structure).

Populations of the auxiliary game are the (population, type) pairs of the
structure ("blocks").  A block of population k carries mass gamma^k.  Each
weighted type profile contributes the total flow obtained by adding the flows
of its blocks; block costs are the probability-weighted action costs over the
profiles containing the block, and the weighted sum of state potentials is a
potential for these costs.
"""
from __future__ import annotations

import numpy as np

from .errors import ConsistencyError
from .model import CongestionGame
from .structure import InformationStructure

ZERO_PROB = 1e-12


class AuxiliaryGame:
    def __init__(self, game, block_keys, block_mass, profile_blocks, profile_states, weights):
        self.game = game
        self.block_keys = list(block_keys)
        self.block_mass = np.asarray(block_mass, dtype=float)
        self.profile_blocks = np.asarray(profile_blocks, dtype=np.int64)
        self.profile_states = np.asarray(profile_states, dtype=np.int64)
        self.weights = np.asarray(weights, dtype=float)
        if np.any(self.weights < 0):
            raise ConsistencyError("negative profile weight")
        B = len(self.block_keys)
        P = len(self.weights)
        flat = self.profile_blocks.ravel()
        self.type_prob = np.bincount(flat, weights=np.repeat(self.weights, self.profile_blocks.shape[1]), minlength=B)
        self.active = self.type_prob > ZERO_PROB
        order = np.argsort(flat, kind="stable")
        rows = order // self.profile_blocks.shape[1]
        bounds = np.searchsorted(flat[order], np.arange(B + 1))
        self.block_profiles = [rows[bounds[b]:bounds[b + 1]] for b in range(B)]
        self._state_groups = [
            (s, np.flatnonzero(self.profile_states == s)) for s in np.unique(self.profile_states)
        ]
        self.n_profiles = P

    @property
    def n_blocks(self):
        return len(self.block_keys)

    @property
    def n_actions(self):
        return self.game.n_actions

    def state_weights(self):
        """Total weight per game state (equals the prior for a proper structure)."""
        return np.bincount(self.profile_states, weights=self.weights, minlength=len(self.game.states))

    def total_flows(self, Y):
        return Y[self.profile_blocks].sum(axis=1)

    def profile_costs(self, F, states=None, groups=None):
        """Action costs (P x A) at total flows ``F``."""
        out = np.empty_like(F)
        if groups is None:
            if states is None:
                groups = self._state_groups
            else:
                groups = [(s, np.flatnonzero(states == s)) for s in np.unique(states)]
        for s, idx in groups:
            out[idx] = self.game.action_costs(F[idx], int(s))
        return out

    def block_costs(self, Y, F=None):
        """Unnormalized block costs C (B x A): weighted action costs summed over profiles."""
        if F is None:
            F = self.total_flows(Y)
        wc = self.weights[:, None] * self.profile_costs(F)
        K = self.profile_blocks.shape[1]
        out = np.zeros((self.n_blocks, self.n_actions))
        flat = self.profile_blocks.ravel()
        for a in range(self.n_actions):
            out[:, a] = np.bincount(flat, weights=np.repeat(wc[:, a], K), minlength=self.n_blocks)
        return out

    def cost_jacobian(self, Y, F=None):
        """Jacobian of the flattened block costs with respect to the flattened flows."""
        if F is None:
            F = self.total_flows(Y)
        P, K = self.profile_blocks.shape
        B, A = self.n_blocks, self.n_actions
        H = np.empty((P, A, A))
        for s, idx in self._state_groups:
            H[idx] = self.game.action_cost_jacobian(F[idx], int(s))
        H *= self.weights[:, None, None]
        # incidence of profiles on blocks, counting repeated blocks
        M = np.zeros((P, B))
        np.add.at(M, (np.repeat(np.arange(P), K), self.profile_blocks.ravel()), 1.0)
        J = np.empty((B, A, B, A))
        for a in range(A):
            for c in range(A):
                J[:, a, :, c] = M.T @ (H[:, a, c, None] * M)
        return J.reshape(B * A, B * A)

    def interim_costs(self, Y):
        """Conditional expected costs (B x A); rows of zero-probability blocks are NaN."""
        C = self.block_costs(Y)
        out = np.full_like(C, np.nan)
        out[self.active] = C[self.active] / self.type_prob[self.active, None]
        return out

    def potential(self, Y, F=None):
        if F is None:
            F = self.total_flows(Y)
        total = 0.0
        for s, idx in self._state_groups:
            total += float(np.dot(self.weights[idx], self.game.potential(F[idx], int(s))))
        return total

    def expected_social_cost(self, Y, F=None):
        if F is None:
            F = self.total_flows(Y)
        total = 0.0
        for s, idx in self._state_groups:
            total += float(np.dot(self.weights[idx], self.game.social_costs(F[idx], int(s))))
        return total

    def uniform_flows(self):
        A = self.n_actions
        return np.repeat(self.block_mass[:, None] / A, A, axis=1)

    def corner_flows(self):
        Y = np.zeros((self.n_blocks, self.n_actions))
        Y[:, 0] = self.block_mass
        return Y

    def random_flows(self, rng):
        Y = rng.dirichlet(np.ones(self.n_actions), size=self.n_blocks)
        return Y * self.block_mass[:, None]


def complete_information(game: CongestionGame, state) -> AuxiliaryGame:
    """One population of mass one facing the curves of ``state``."""
    s = game.state_index(state)
    return AuxiliaryGame(game, [(0, "complete")], [1.0], [[0]], [s], [1.0])


def build_auxiliary(game: CongestionGame, structure: InformationStructure) -> AuxiliaryGame:
    """Auxiliary game of ``game`` extended with ``structure``.

    Rotation-encoded structures are expanded state by state with array
    operations instead of materializing the explicit law.
    """
    if set(structure.states) != set(game.states):
        raise ConsistencyError(
            f"structure states {sorted(structure.states)} differ from game states {sorted(game.states)}"
        )
    keys = structure.block_keys()
    index = {key: i for i, key in enumerate(keys)}
    mass = [structure.population_sizes[k] for k, _ in keys]
    rows, states, weights = [], [], []
    if structure.is_rotation and structure._law is None:
        enc = structure.encoding
        K = enc.K
        # block index of (k, action i)
        lookup = np.array([[index[(k, a)] for a in enc.actions] for k in range(K)])
        for s, items in enc.per_state.items():
            si = game.state_index(s)
            ps = game.prior[si]
            blocks, w = [], []
            for counts, p in items:
                if p <= 0:
                    continue
                rot = enc.rotations(counts)
                blocks.append(lookup[np.arange(K)[None, :], rot])
                w.append(np.full(K, ps * p / K))
            if not blocks:
                continue
            blocks = np.concatenate(blocks)
            w = np.concatenate(w)
            uniq, inv = np.unique(blocks, axis=0, return_inverse=True)
            agg = np.bincount(inv.ravel(), weights=w, minlength=len(uniq))
            rows.append(uniq)
            states.append(np.full(len(uniq), si))
            weights.append(agg)
        return AuxiliaryGame(game, keys, mass, np.concatenate(rows), np.concatenate(states), np.concatenate(weights))
    for s in structure.states:
        si = game.state_index(s)
        ps = game.prior[si]
        for prof, p in structure.profiles(s):
            if p <= 0:
                continue
            rows.append([index[(k, t)] for k, t in enumerate(prof)])
            states.append(si)
            weights.append(ps * p)
    return AuxiliaryGame(game, keys, mass, rows, states, weights)
