"""Congestion games with piecewise-polynomial resource costs.

A game holds a finite state space with a full-support prior, a set of
resources, actions given as subsets of resources, and one cost curve per
(resource, state).  Flows live on the unit simplex over actions; the load on
a resource is the total flow of the actions that use it.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import DomainError, ModelError

CONTINUITY_TOL = 1e-12
PRIOR_TOL = 1e-12
FLOW_TOL = 1e-10
DISTINCT_TOL = 1e-12
# slope tolerance when deciding monotonicity of a curve
SLOPE_TOL = 1e-12


class ConvexityClass(str, enum.Enum):
    NON_CONVEX = "non_convex"
    CONVEX = "convex"
    STRICTLY_CONVEX_ON_SIMPLEX = "strictly_convex_on_simplex"


class PiecewiseCostCurve:
    """Continuous piecewise polynomial on [0, 1].

    ``pieces[i]`` holds the coefficients (constant term first) used on
    ``[breakpoints[i], breakpoints[i+1]]``.  Loads slightly outside [0, 1]
    are evaluated by extending the first or last piece.
    """

    def __init__(self, breakpoints: Sequence[float], pieces: Sequence[Sequence[float]]):
        bp = np.asarray(breakpoints, dtype=float)
        if bp.ndim != 1 or len(bp) < 2:
            raise ModelError("CURVE_BREAKPOINTS", "need at least two breakpoints")
        if bp[0] != 0.0 or bp[-1] != 1.0:
            raise ModelError("CURVE_BREAKPOINTS", "breakpoints must start at 0 and end at 1")
        if np.any(np.diff(bp) <= 0):
            raise ModelError("CURVE_BREAKPOINTS", "breakpoints must be strictly increasing")
        if len(pieces) != len(bp) - 1:
            raise ModelError(
                "CURVE_PIECES", f"{len(bp) - 1} intervals but {len(pieces)} pieces"
            )
        coefs = []
        for i, c in enumerate(pieces):
            arr = np.atleast_1d(np.asarray(c, dtype=float))
            if arr.ndim != 1 or arr.size == 0 or not np.all(np.isfinite(arr)):
                raise ModelError("CURVE_PIECES", f"piece {i} is not a finite coefficient list")
            coefs.append(arr)
        for i in range(1, len(coefs)):
            x = bp[i]
            left, right = P.polyval(x, coefs[i - 1]), P.polyval(x, coefs[i])
            if abs(left - right) > CONTINUITY_TOL:
                raise ModelError(
                    "CURVE_DISCONTINUOUS",
                    f"jump of {right - left:.3e} at breakpoint {x}",
                )
        self.breakpoints = bp
        self.pieces = tuple(coefs)
        self._anti = tuple(P.polyint(c) for c in coefs)
        self._deriv = tuple(P.polyder(c) if len(c) > 1 else np.zeros(1) for c in coefs)
        # integral from 0 to the start of each piece
        offs = [0.0]
        for i in range(len(coefs) - 1):
            a, b = bp[i], bp[i + 1]
            offs.append(offs[-1] + P.polyval(b, self._anti[i]) - P.polyval(a, self._anti[i]))
        self._offsets = np.array(offs)

    @classmethod
    def polynomial(cls, coefs):
        return cls([0.0, 1.0], [coefs])

    @classmethod
    def constant(cls, value):
        return cls([0.0, 1.0], [[value]])

    def _piece_index(self, x):
        idx = np.searchsorted(self.breakpoints, x, side="right") - 1
        return np.clip(idx, 0, len(self.pieces) - 1)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if len(self.pieces) == 1:
            return P.polyval(x, self.pieces[0])
        idx = self._piece_index(x)
        out = np.empty_like(x)
        for i, c in enumerate(self.pieces):
            m = idx == i
            if np.any(m):
                out[m] = P.polyval(x[m], c)
        return out if out.ndim else float(out)

    def derivative(self, x):
        """Derivative of the active piece (right derivative at breakpoints)."""
        x = np.asarray(x, dtype=float)
        idx = self._piece_index(x)
        out = np.empty_like(x)
        for i, d in enumerate(self._deriv):
            m = idx == i
            if np.any(m):
                out[m] = P.polyval(x[m], d)
        return out if out.ndim else float(out)

    def integral(self, x):
        """Integral of the curve from 0 to ``x``."""
        x = np.asarray(x, dtype=float)
        idx = self._piece_index(x)
        out = np.empty_like(x)
        for i, anti in enumerate(self._anti):
            m = idx == i
            if np.any(m):
                out[m] = (
                    self._offsets[i]
                    + P.polyval(x[m], anti)
                    - P.polyval(self.breakpoints[i], anti)
                )
        return out if out.ndim else float(out)

    def slope_bounds(self):
        """(min slope, whether some piece has a nonzero derivative everywhere but isolated points)."""
        lo_slope = np.inf
        strict = True
        for i, c in enumerate(self.pieces):
            a, b = self.breakpoints[i], self.breakpoints[i + 1]
            d = P.polyder(c) if len(c) > 1 else np.array([0.0])
            if np.max(np.abs(d)) <= SLOPE_TOL:
                strict = False
                lo_slope = min(lo_slope, 0.0)
                continue
            pts = [a, b]
            if len(d) > 1:
                dd = P.polyder(d)
                if np.any(dd != 0):
                    for r in np.roots(dd[::-1]) if len(dd) > 1 else []:
                        if abs(r.imag) < 1e-12 and a < r.real < b:
                            pts.append(r.real)
            lo_slope = min(lo_slope, float(np.min(P.polyval(np.array(pts), d))))
        return lo_slope, strict

    def is_nondecreasing(self):
        return self.slope_bounds()[0] >= -SLOPE_TOL

    def is_strictly_increasing(self):
        lo, strict = self.slope_bounds()
        return lo >= -SLOPE_TOL and strict

    def to_dict(self):
        return {
            "breakpoints": [float(b) for b in self.breakpoints],
            "pieces": [[float(v) for v in c] for c in self.pieces],
        }

    def __eq__(self, other):
        if not isinstance(other, PiecewiseCostCurve):
            return NotImplemented
        return (
            np.array_equal(self.breakpoints, other.breakpoints)
            and len(self.pieces) == len(other.pieces)
            and all(np.array_equal(a, b) for a, b in zip(self.pieces, other.pieces))
        )

    def __repr__(self):
        return f"PiecewiseCostCurve({self.breakpoints.tolist()}, {[c.tolist() for c in self.pieces]})"


def average_curve(curves, weights):
    """Weighted sum of curves on the merged breakpoint grid."""
    grid = np.unique(np.concatenate([c.breakpoints for c in curves]))
    pieces = []
    for lo, hi in zip(grid[:-1], grid[1:]):
        mid = 0.5 * (lo + hi)
        acc = np.zeros(1)
        for c, w in zip(curves, weights):
            acc = P.polyadd(acc, w * c.pieces[int(c._piece_index(mid))])
        pieces.append(acc)
    return PiecewiseCostCurve(grid, pieces)


@dataclass(frozen=True)
class FlowProfile:
    """Nonnegative flow vector over actions with total ``mass``."""

    mass: float
    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        if e.ndim != 1:
            raise DomainError("flow entries must be a vector")
        if np.any(e < -FLOW_TOL):
            raise DomainError(f"negative flow entry {e.min():.3e}")
        if abs(e.sum() - self.mass) > FLOW_TOL:
            raise DomainError(f"flow sums to {e.sum()!r}, expected mass {self.mass!r}")
        e = np.where(e < 0, 0.0, e)
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @classmethod
    def unit(cls, entries):
        return cls(1.0, np.asarray(entries, dtype=float))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __eq__(self, other):
        if not isinstance(other, FlowProfile):
            return NotImplemented
        return self.mass == other.mass and np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash((self.mass, self.entries.tobytes()))


def as_unit_flow(flow, n_actions=None) -> np.ndarray:
    """Coerce ``flow`` to a validated mass-1 vector."""
    if isinstance(flow, FlowProfile):
        if abs(flow.mass - 1.0) > FLOW_TOL:
            raise DomainError(f"expected a unit-mass flow, got mass {flow.mass}")
        arr = flow.entries
    else:
        arr = FlowProfile(1.0, np.asarray(flow, dtype=float)).entries
    if n_actions is not None and len(arr) != n_actions:
        raise DomainError(f"flow has {len(arr)} entries, game has {n_actions} actions")
    return arr


class CongestionGame:
    """A basic game in congestion form.

    Parameters
    ----------
    states, prior
        State labels and a strictly positive prior summing to one.
    resources
        Resource labels.
    actions
        Each action is a nonempty collection of resource labels.
    cost_curves
        Mapping ``(resource, state) -> PiecewiseCostCurve``.
    action_labels
        Optional; defaults to the resource name for singleton actions and
        ``"+".join(resources)`` otherwise.
    """

    def __init__(self, states, prior, resources, actions, cost_curves, action_labels=None):
        self.states = tuple(str(s) for s in states)
        self.resources = tuple(str(r) for r in resources)
        if len(set(self.states)) != len(self.states) or not self.states:
            raise ModelError("STATES", "state labels must be nonempty and distinct")
        if len(set(self.resources)) != len(self.resources) or not self.resources:
            raise ModelError("RESOURCES", "resource labels must be nonempty and distinct")
        prior = np.asarray(prior, dtype=float)
        if prior.shape != (len(self.states),):
            raise ModelError("PRIOR_SHAPE", f"prior has {prior.size} entries for {len(self.states)} states")
        if abs(prior.sum() - 1.0) > PRIOR_TOL:
            raise ModelError("PRIOR_SUM", f"prior sums to {prior.sum()!r}")
        if np.any(prior <= 0):
            raise ModelError("PRIOR_POSITIVE", "every state needs positive prior probability")
        prior.setflags(write=False)
        self.prior = prior

        acts = []
        for i, a in enumerate(actions):
            a = tuple(str(e) for e in a)
            if not a:
                raise ModelError("ACTION_EMPTY", f"action {i} uses no resource")
            for e in a:
                if e not in self.resources:
                    raise ModelError("UNKNOWN_RESOURCE", f"action {i} uses unknown resource {e!r}")
            acts.append(a)
        if len({frozenset(a) for a in acts}) != len(acts):
            raise ModelError("DUPLICATE_ACTION", "action resource sets must be distinct")
        used = {e for a in acts for e in a}
        missing = [e for e in self.resources if e not in used]
        if missing:
            raise ModelError("UNUSED_RESOURCE", f"resources {missing} appear in no action")
        self.actions = tuple(acts)
        if action_labels is None:
            action_labels = [a[0] if len(a) == 1 else "+".join(a) for a in acts]
        self.action_labels = tuple(str(x) for x in action_labels)
        if len(self.action_labels) != len(acts) or len(set(self.action_labels)) != len(acts):
            raise ModelError("ACTION_LABELS", "action labels must be distinct, one per action")

        curves = {}
        for e in self.resources:
            for s in self.states:
                try:
                    c = cost_curves[(e, s)]
                except KeyError:
                    raise ModelError("MISSING_CURVE", f"no cost curve for resource {e!r} in state {s!r}")
                if not isinstance(c, PiecewiseCostCurve):
                    raise ModelError("CURVE_TYPE", f"curve for ({e!r}, {s!r}) is not a PiecewiseCostCurve")
                curves[(e, s)] = c
        self.cost_curves = curves

        inc = np.zeros((len(acts), len(self.resources)))
        for i, a in enumerate(acts):
            for e in a:
                inc[i, self.resources.index(e)] = 1.0
        inc.setflags(write=False)
        self.incidence = inc
        self._state_index = {s: i for i, s in enumerate(self.states)}
        self._action_index = {a: i for i, a in enumerate(self.action_labels)}

    @property
    def n_actions(self):
        return len(self.actions)

    def state_index(self, state) -> int:
        if isinstance(state, (int, np.integer)) and not isinstance(state, bool):
            if 0 <= state < len(self.states):
                return int(state)
            raise KeyError(f"state index {state} out of range")
        try:
            return self._state_index[state]
        except KeyError:
            raise KeyError(f"unknown state {state!r}") from None

    def action_index(self, action) -> int:
        if isinstance(action, (int, np.integer)) and not isinstance(action, bool):
            if 0 <= action < self.n_actions:
                return int(action)
            raise KeyError(f"action index {action} out of range")
        try:
            return self._action_index[action]
        except KeyError:
            raise KeyError(f"unknown action {action!r}") from None

    # Vectorized evaluation; ``flows`` has trailing axis of length n_actions and
    # is not required to lie on the simplex.
    def loads(self, flows):
        return np.asarray(flows, dtype=float) @ self.incidence

    def resource_costs(self, loads, state):
        s = self.states[self.state_index(state)]
        loads = np.asarray(loads, dtype=float)
        out = np.empty_like(loads)
        for j, e in enumerate(self.resources):
            out[..., j] = self.cost_curves[(e, s)](loads[..., j])
        return out

    def action_costs(self, flows, state):
        return self.resource_costs(self.loads(flows), state) @ self.incidence.T

    def action_cost_jacobian(self, flows, state):
        """d c_a / d y_a' with trailing shape (A, A)."""
        s = self.states[self.state_index(state)]
        x = self.loads(flows)
        slopes = np.empty_like(x)
        for j, e in enumerate(self.resources):
            slopes[..., j] = self.cost_curves[(e, s)].derivative(x[..., j])
        return np.einsum("ae,...e,be->...ab", self.incidence, slopes, self.incidence)

    def potential(self, flows, state):
        s = self.states[self.state_index(state)]
        x = self.loads(flows)
        total = np.zeros(x.shape[:-1])
        for j, e in enumerate(self.resources):
            total = total + self.cost_curves[(e, s)].integral(x[..., j])
        return total

    def social_costs(self, flows, state):
        flows = np.asarray(flows, dtype=float)
        return np.sum(flows * self.action_costs(flows, state), axis=-1)

    def average_game(self, label="average"):
        """Complete-information game whose curves are the prior-weighted average."""
        curves = {
            (e, label): average_curve([self.cost_curves[(e, s)] for s in self.states], self.prior)
            for e in self.resources
        }
        return CongestionGame([label], [1.0], self.resources, self.actions, curves, self.action_labels)

    def restricted_to(self, state):
        """Single-state game with the curves of ``state``."""
        s = self.states[self.state_index(state)]
        curves = {(e, s): self.cost_curves[(e, s)] for e in self.resources}
        return CongestionGame([s], [1.0], self.resources, self.actions, curves, self.action_labels)

    def __eq__(self, other):
        if not isinstance(other, CongestionGame):
            return NotImplemented
        return (
            self.states == other.states
            and np.array_equal(self.prior, other.prior)
            and self.resources == other.resources
            and self.actions == other.actions
            and self.action_labels == other.action_labels
            and self.cost_curves == other.cost_curves
        )

    def __repr__(self):
        return (
            f"CongestionGame(states={self.states}, actions={self.action_labels}, "
            f"resources={self.resources})"
        )


def singleton_game(states, prior, curves: Mapping, labels=None):
    """Game whose actions are single resources; ``curves[(action, state)]``."""
    labels = list(labels) if labels is not None else sorted({a for a, _ in curves})
    return CongestionGame(states, prior, labels, [[a] for a in labels], dict(curves))


def action_cost(game: CongestionGame, action, flow, state) -> float:
    y = as_unit_flow(flow, game.n_actions)
    a = game.action_index(action)
    return float(game.action_costs(y, state)[a])


def social_cost(game: CongestionGame, flow, state) -> float:
    """Flow-weighted sum of action costs in ``state``."""
    y = as_unit_flow(flow, game.n_actions)
    game.state_index(state)
    return float(game.social_costs(y, state))


def potential_value(game: CongestionGame, flow, state) -> float:
    """Sum over resources of the integral of the cost curve up to the load."""
    y = as_unit_flow(flow, game.n_actions)
    game.state_index(state)
    return float(game.potential(y, state))


def classify_potential(game: CongestionGame) -> ConvexityClass:
    curves = list(game.cost_curves.values())
    if not all(c.is_nondecreasing() for c in curves):
        return ConvexityClass.NON_CONVEX
    singleton = all(len(a) == 1 for a in game.actions) and len(game.actions) == len(game.resources)
    if singleton and all(c.is_strictly_increasing() for c in curves):
        return ConvexityClass.STRICTLY_CONVEX_ON_SIMPLEX
    return ConvexityClass.CONVEX


@dataclass(frozen=True)
class FiniteOutcome:
    """State-conditional finite distributions over unit flows.

    ``per_state`` maps each state label to a tuple of ``(FlowProfile, prob)``.
    """

    per_state: Mapping[str, tuple] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for s, atoms in self.per_state.items():
            items = []
            for flow, prob in atoms:
                f = flow if isinstance(flow, FlowProfile) else FlowProfile.unit(flow)
                if abs(f.mass - 1.0) > FLOW_TOL:
                    raise ModelError("OUTCOME_MASS", f"flow in state {s!r} has mass {f.mass}")
                items.append((f, float(prob)))
            probs = np.array([p for _, p in items])
            if len(items) == 0:
                raise ModelError("OUTCOME_EMPTY", f"no atoms for state {s!r}")
            if np.any(probs < -FLOW_TOL) or abs(probs.sum() - 1.0) > FLOW_TOL:
                raise ModelError("OUTCOME_PROB", f"probabilities in state {s!r} sum to {probs.sum()!r}")
            for i in range(len(items)):
                for j in range(i):
                    d = np.max(np.abs(items[i][0].entries - items[j][0].entries))
                    if d <= DISTINCT_TOL:
                        raise ModelError("OUTCOME_DUPLICATE", f"repeated flow in state {s!r}")
            clean[str(s)] = tuple(items)
        object.__setattr__(self, "per_state", clean)

    @classmethod
    def from_atoms(cls, per_state, merge_tol=None):
        """Build from ``{state: [(flow, prob), ...]}``; optionally merge near-equal flows."""
        if merge_tol is None:
            return cls(per_state)
        out = {}
        for s, atoms in per_state.items():
            merged = []
            for flow, prob in atoms:
                y = np.asarray(flow.entries if isinstance(flow, FlowProfile) else flow, dtype=float)
                for m in merged:
                    if np.max(np.abs(m[0] - y)) <= merge_tol:
                        m[1] += prob
                        break
                else:
                    merged.append([y, float(prob)])
            out[s] = [(FlowProfile.unit(y / y.sum()), p) for y, p in merged]
        return cls(out)

    @classmethod
    def point_masses(cls, flows: Mapping):
        return cls({s: [(f, 1.0)] for s, f in flows.items()})

    def atoms(self, state):
        return self.per_state[state]

    def support_flows(self):
        """Distinct support flows over all states, in first-seen order."""
        seen = []
        for atoms in self.per_state.values():
            for f, p in atoms:
                if not any(np.max(np.abs(f.entries - g)) <= DISTINCT_TOL for g in seen):
                    seen.append(f.entries)
        return seen

    def check_game(self, game: CongestionGame):
        if set(self.per_state) != set(game.states):
            raise ModelError(
                "OUTCOME_STATES",
                f"outcome states {sorted(self.per_state)} differ from game states {sorted(game.states)}",
            )
        for s, atoms in self.per_state.items():
            for f, _ in atoms:
                if len(f.entries) != game.n_actions:
                    raise ModelError("OUTCOME_ACTIONS", f"flow length {len(f.entries)} in state {s!r}")

    def pruned(self, threshold=1e-12):
        """Drop atoms with probability below ``threshold`` and renormalize."""
        out = {}
        for s, atoms in self.per_state.items():
            kept = [(f, p) for f, p in atoms if p >= threshold]
            tot = sum(p for _, p in kept)
            out[s] = [(f, p / tot) for f, p in kept]
        return FiniteOutcome(out)

    def expectation(self, game: CongestionGame, fn):
        """Ex ante expectation of ``fn(flow_vector, state)``."""
        total = 0.0
        for s, atoms in self.per_state.items():
            ps = game.prior[game.state_index(s)]
            total += ps * sum(p * fn(f.entries, s) for f, p in atoms)
        return total


def expected_social_cost(game: CongestionGame, outcome: FiniteOutcome) -> float:
    return outcome.expectation(game, lambda y, s: float(game.social_costs(y, s)))


def outcome_distance(mu: FiniteOutcome, nu: FiniteOutcome) -> float:
    """Greedy atom matching distance, maximized over states.

    Within a state atoms are paired greedily by smallest sup-norm flow
    distance; a pair contributes flow distance plus probability difference,
    and mass left unmatched contributes fully.
    """
    worst = 0.0
    for s in set(mu.per_state) | set(nu.per_state):
        a = list(mu.per_state.get(s, ()))
        b = list(nu.per_state.get(s, ()))
        pairs = sorted(
            (float(np.max(np.abs(fa.entries - fb.entries))), i, j)
            for i, (fa, _) in enumerate(a)
            for j, (fb, _) in enumerate(b)
        )
        used_a, used_b = set(), set()
        for d, i, j in pairs:
            if i in used_a or j in used_b:
                continue
            used_a.add(i)
            used_b.add(j)
            worst = max(worst, d + abs(a[i][1] - b[j][1]))
        for i, (_, p) in enumerate(a):
            if i not in used_a:
                worst = max(worst, p)
        for j, (_, p) in enumerate(b):
            if j not in used_b:
                worst = max(worst, p)
    return worst
