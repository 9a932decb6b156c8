"""Direct information structures that implement finite-support BCWE.

Each support flow is rounded to a multiple of 1/K.  Conditional on the state
and the drawn flow, recommendations are the K cyclic rotations of a base
assignment holding N(y_a) copies of each action a; every population is then
recommended a with probability N(y_a)/K and the total obedient flow is the
rounded flow itself.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations
from math import ceil, factorial, lcm

import numpy as np
from scipy.stats import qmc

from .bcwe import FlowGrid
from .errors import ConsistencyError, DomainError, ResourceLimitError
from .model import CongestionGame, FiniteOutcome, as_unit_flow
from .structure import InformationStructure, InterimFlowProfile, RotationEncoding

MAX_DENOMINATOR = 10**6
RATIONAL_TOL = 1e-15
MATCH_TOL = 1e-12


@dataclass(frozen=True)
class RationalApproximation:
    K: int
    flows: tuple
    counts: tuple
    eta_achieved: float

    def counts_for(self, flow):
        y = np.asarray(flow, dtype=float)
        for f, c in zip(self.flows, self.counts):
            if f.shape == y.shape and np.max(np.abs(f - y)) <= MATCH_TOL:
                return c
        raise ConsistencyError(f"flow {y.tolist()} is not covered by the approximation")

    def rounded(self, flow):
        return np.array(self.counts_for(flow), dtype=float) / self.K


def _exact_fractions(y):
    fr = [Fraction(float(v)).limit_denominator(MAX_DENOMINATOR) for v in y]
    if any(abs(float(f) - v) > RATIONAL_TOL for f, v in zip(fr, y)) or sum(fr) != 1:
        return None
    return fr


def largest_remainder(y, K):
    """Integer counts summing to K closest to K*y; leftovers go to the largest
    fractional parts, ties to the lowest index."""
    raw = K * np.asarray(y, dtype=float)
    base = np.floor(raw).astype(np.int64)
    left = K - int(base.sum())
    frac = raw - base
    order = sorted(range(len(y)), key=lambda i: (-frac[i], i))
    for i in order[:left]:
        base[i] += 1
    return tuple(int(v) for v in base)


def rational_approximation(flows, eta: float) -> RationalApproximation:
    flows = [as_unit_flow(f) for f in flows]
    if not flows:
        raise DomainError("no flows to approximate")
    fracs = [_exact_fractions(y) for y in flows]
    if all(f is not None for f in fracs):
        d = lcm(*(q.denominator for f in fracs for q in f))
        if d <= MAX_DENOMINATOR:
            counts = tuple(tuple(int(q * d) for q in f) for f in fracs)
            return RationalApproximation(d, tuple(flows), counts, 0.0)
    if not eta > 0:
        raise DomainError("eta must be positive unless every flow is rational")
    bound = ceil(len(flows[0]) / eta)
    for K in range(1, bound + 1):
        counts = tuple(largest_remainder(y, K) for y in flows)
        dev = max(float(np.max(np.abs(np.array(c) / K - y))) for c, y in zip(counts, flows))
        if dev <= eta:
            return RationalApproximation(K, tuple(flows), counts, dev)
    raise AssertionError("largest-remainder rounding failed within the search bound")


def _action_labels(actions):
    if isinstance(actions, CongestionGame):
        return actions.action_labels
    return tuple(str(a) for a in actions)


def build_direct_structure(bcwe: FiniteOutcome, approx: RationalApproximation, actions) -> InformationStructure:
    """Rotation-symmetric direct structure with ``approx.K`` populations."""
    labels = _action_labels(actions)
    per_state = {}
    for s, atoms in bcwe.per_state.items():
        merged = {}
        for f, p in atoms:
            if len(f.entries) != len(labels):
                raise ConsistencyError("flow length does not match the action list")
            c = approx.counts_for(f.entries)
            merged[c] = merged.get(c, 0.0) + p
        per_state[s] = tuple(merged.items())
    K = approx.K
    enc = RotationEncoding(K, labels, per_state)
    return InformationStructure([1.0 / K] * K, [labels] * K, encoding=enc)


def uniform_subset_structure(bcwe: FiniteOutcome, approx: RationalApproximation, actions, limit=10**5):
    """Explicit direct structure recommending each action to a uniformly drawn
    set of N(y_a) populations.  Exponential in K; for cross-checks only."""
    labels = _action_labels(actions)
    K = approx.K
    law = {}
    for s, atoms in bcwe.per_state.items():
        acc = {}
        for f, p in atoms:
            c = approx.counts_for(f.entries)
            n = factorial(K)
            for x in c:
                n //= factorial(x)
            if n > limit:
                raise ResourceLimitError(f"{n} assignments exceed the limit {limit}")
            base = [labels[i] for i, x in enumerate(c) for _ in range(x)]
            for prof in set(permutations(base)):
                acc[prof] = acc.get(prof, 0.0) + p / n
        law[s] = list(acc.items())
    return InformationStructure([1.0 / K] * K, [labels] * K, law)


def obedient_profile(structure: InformationStructure, actions=None) -> InterimFlowProfile:
    """Every population puts its whole mass on the recommended action."""
    if actions is None:
        actions = structure.encoding.actions if structure.is_rotation else structure.type_sets[0]
    labels = _action_labels(actions)
    if not structure.is_direct(labels):
        raise DomainError("obedient profiles exist only for direct structures")
    keys = structure.block_keys()
    flows = np.zeros((len(keys), len(labels)))
    for i, (k, t) in enumerate(keys):
        flows[i, labels.index(t)] = structure.population_sizes[k]
    return InterimFlowProfile.for_structure(structure, flows, labels)


@dataclass(frozen=True)
class LipschitzEstimate:
    L: float
    sample_count: int


def _simplex_points(u):
    s = np.sort(u, axis=1)
    z = np.zeros((len(u), 1))
    return np.diff(np.hstack([z, s, z + 1.0]), axis=1)


def grid_neighbour_pairs(n_actions, D=10):
    """All pairs of grid points one unit move apart."""
    g = FlowGrid(D, n_actions)
    lo, hi = [], []
    for i in range(n_actions):
        for j in range(n_actions):
            if i == j:
                continue
            m = g.counts[:, i] > 0
            src = g.counts[m]
            dst = src.copy()
            dst[:, i] -= 1
            dst[:, j] += 1
            lo.append(src / D)
            hi.append(dst / D)
    return np.vstack(lo), np.vstack(hi)


def _obedience_terms(game):
    def terms(Y, s):
        C = game.action_costs(Y, s)
        return (Y[:, :, None] * C[:, None, :]).reshape(len(Y), -1)
    return terms


def estimate_modulus(game: CongestionGame, sample_count: int = 2048, seed=0, fn=None) -> LipschitzEstimate:
    """Largest observed ratio |f(y) - f(z)| / max_a |y_a - z_a|.

    ``fn(Y, state)`` maps an (N x A) batch of flows to an (N,) or (N x m)
    array; by default it returns all products y_a * c_b(y, state).
    Pairs come from a scrambled Halton sequence plus every pair of adjacent
    points on the grid with denominator 10.
    """
    if sample_count < 2:
        raise DomainError("sample_count must be at least 2")
    A = game.n_actions
    if A == 1:
        return LipschitzEstimate(0.0, sample_count)
    fn = fn or _obedience_terms(game)
    u = qmc.Halton(d=2 * (A - 1), scramble=True, seed=seed).random(sample_count)
    Y = _simplex_points(u[:, : A - 1])
    Z = _simplex_points(u[:, A - 1:])
    gy, gz = grid_neighbour_pairs(A)
    Y = np.vstack([Y, gy])
    Z = np.vstack([Z, gz])
    dist = np.max(np.abs(Y - Z), axis=1)
    ok = dist > 1e-12
    Y, Z, dist = Y[ok], Z[ok], dist[ok]
    L = 0.0
    for s in game.states:
        fy = np.asarray(fn(Y, s), dtype=float).reshape(len(Y), -1)
        fz = np.asarray(fn(Z, s), dtype=float).reshape(len(Z), -1)
        L = max(L, float(np.max(np.max(np.abs(fy - fz), axis=1) / dist)))
    return LipschitzEstimate(L, sample_count)


def min_positive_flow(bcwe: FiniteOutcome, threshold=1e-12) -> float:
    vals = [v for f in bcwe.support_flows() for v in f if v > threshold]
    return float(min(vals))


def epsilon_bound(approx: RationalApproximation, bcwe: FiniteOutcome, lip: LipschitzEstimate) -> float:
    """Obedience slack guaranteed for the rotation structure: 4 L eta / eps0,
    eps0 being the smallest positive support flow.  Requires eta <= eps0 / 2."""
    eps0 = min_positive_flow(bcwe)
    eta = approx.eta_achieved
    if eta > eps0 / 2:
        raise DomainError(
            f"rounding error {eta:.3e} exceeds half the smallest positive flow {eps0:.3e}; "
            "use a smaller eta (larger K)"
        )
    if eta == 0 or lip.L == 0:
        return 0.0
    return 4.0 * lip.L * eta / eps0
