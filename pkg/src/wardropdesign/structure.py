"""Information structures: populations, type sets and state-dependent signal laws."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import ModelError, ResourceLimitError

PROB_TOL = 1e-12
MAX_EXPLICIT_PROFILES = 10**6
NULL_TYPE = "null"


@dataclass(frozen=True)
class RotationEncoding:
    """Compact law of a direct structure with ``K`` equal populations.

    ``per_state[state]`` lists ``(counts, prob)``: with probability ``prob``
    the recommendations are the ``K`` cyclic rotations (each with weight
    ``prob / K``) of a base assignment holding ``counts[i]`` copies of
    ``actions[i]``, actions taken in sorted label order.
    """

    K: int
    actions: tuple
    per_state: Mapping[str, tuple]

    def base_assignment(self, counts):
        order = sorted(range(len(self.actions)), key=lambda i: self.actions[i])
        base = []
        for i in order:
            base.extend([i] * int(counts[i]))
        return np.array(base, dtype=np.int64)

    def rotations(self, counts):
        """K x K array of action indices; row r is rotation r."""
        base = self.base_assignment(counts)
        K = self.K
        shift = (np.arange(K)[None, :] - np.arange(K)[:, None]) % K
        return base[shift]


class InformationStructure:
    """Populations with sizes summing to one, finite type sets, and a signal law.

    ``signal_law`` maps each state to a list of ``(type_profile, prob)`` with
    one type per population.  A rotation-symmetric structure may omit the
    explicit law; it is expanded from ``encoding`` on first access.
    """

    def __init__(self, population_sizes, type_sets, signal_law=None, encoding="explicit"):
        sizes = np.asarray(population_sizes, dtype=float)
        if sizes.ndim != 1 or sizes.size == 0 or np.any(sizes <= 0):
            raise ModelError("POPULATION_SIZES", "population sizes must be positive")
        if abs(sizes.sum() - 1.0) > PROB_TOL:
            raise ModelError("POPULATION_SIZES", f"population sizes sum to {sizes.sum()!r}")
        sizes.setflags(write=False)
        self.population_sizes = sizes
        self.type_sets = tuple(tuple(str(t) for t in ts) for ts in type_sets)
        if len(self.type_sets) != sizes.size:
            raise ModelError("TYPE_SETS", "one type set per population required")
        for k, ts in enumerate(self.type_sets):
            if not ts or len(set(ts)) != len(ts):
                raise ModelError("TYPE_SETS", f"type set of population {k} must be nonempty and distinct")
        self.encoding = encoding
        if isinstance(encoding, RotationEncoding):
            K = encoding.K
            if sizes.size != K or not np.allclose(sizes, 1.0 / K, rtol=0, atol=1e-15):
                raise ModelError("ROTATION", "rotation encoding needs K populations of size 1/K")
            if any(set(ts) != set(encoding.actions) for ts in self.type_sets):
                raise ModelError("ROTATION", "rotation encoding needs action type sets")
            for s, items in encoding.per_state.items():
                tot = sum(p for _, p in items)
                if abs(tot - 1.0) > PROB_TOL:
                    raise ModelError("SIGNAL_PROB", f"state {s!r} probabilities sum to {tot!r}")
                for counts, _ in items:
                    if sum(counts) != K or any(c < 0 for c in counts):
                        raise ModelError("ROTATION", f"counts {counts} do not sum to K={K}")
            self.states = tuple(encoding.per_state)
            self._law = None
        elif encoding == "explicit":
            if signal_law is None:
                raise ModelError("SIGNAL_LAW", "explicit structures need a signal law")
            self._law = self._validate_law(signal_law)
            self.states = tuple(self._law)
        else:
            raise ModelError("ENCODING", f"unknown encoding {encoding!r}")

    def _validate_law(self, law):
        out = {}
        K = len(self.type_sets)
        for s, items in law.items():
            merged = {}
            for prof, p in items:
                prof = tuple(str(t) for t in prof)
                if len(prof) != K:
                    raise ModelError("SIGNAL_PROFILE", f"profile {prof} has {len(prof)} entries for {K} populations")
                for k, t in enumerate(prof):
                    if t not in self.type_sets[k]:
                        raise ModelError("SIGNAL_PROFILE", f"type {t!r} not in type set of population {k}")
                if p < 0:
                    raise ModelError("SIGNAL_PROB", f"negative probability in state {s!r}")
                merged[prof] = merged.get(prof, 0.0) + float(p)
            tot = sum(merged.values())
            if abs(tot - 1.0) > PROB_TOL:
                raise ModelError("SIGNAL_PROB", f"state {s!r} probabilities sum to {tot!r}")
            out[str(s)] = tuple(merged.items())
        return out

    @property
    def n_populations(self):
        return len(self.type_sets)

    @property
    def is_rotation(self):
        return isinstance(self.encoding, RotationEncoding)

    def is_direct(self, actions=None):
        acts = set(actions) if actions is not None else set(self.type_sets[0])
        return all(set(ts) == acts for ts in self.type_sets)

    @property
    def signal_law(self):
        if self._law is None:
            self._law = self._expand_rotations()
        return self._law

    def _expand_rotations(self):
        enc = self.encoding
        total = sum(len(v) for v in enc.per_state.values()) * enc.K
        if total > MAX_EXPLICIT_PROFILES:
            raise ResourceLimitError(
                f"explicit law would hold up to {total} profiles (limit {MAX_EXPLICIT_PROFILES})"
            )
        law = {}
        for s, items in enc.per_state.items():
            merged = {}
            for counts, p in items:
                # count repeated rotations so the all-equal profile gets p exactly
                rows, reps = np.unique(enc.rotations(counts), axis=0, return_counts=True)
                for row, n in zip(rows, reps):
                    prof = tuple(enc.actions[i] for i in row)
                    merged[prof] = merged.get(prof, 0.0) + p * int(n) / enc.K
            law[s] = tuple(merged.items())
        return law

    def profiles(self, state):
        return self.signal_law[state]

    def block_keys(self):
        """(population, type) pairs in canonical order."""
        return [(k, t) for k, ts in enumerate(self.type_sets) for t in ts]

    def explicit(self):
        """Same structure with the law materialized and encoding ``explicit``."""
        return InformationStructure(self.population_sizes, self.type_sets, self.signal_law)

    def __repr__(self):
        enc = f"rotation(K={self.encoding.K})" if self.is_rotation else "explicit"
        return f"InformationStructure(populations={self.n_populations}, encoding={enc})"


def null_structure(states):
    """One population, one uninformative type."""
    return InformationStructure([1.0], [[NULL_TYPE]], {s: [((NULL_TYPE,), 1.0)] for s in states})


def public_structure(states, signals: Mapping):
    """One population observing a public signal; ``signals[state] = {signal: prob}``."""
    types = sorted({t for d in signals.values() for t in d})
    law = {s: [((t,), p) for t, p in signals[s].items()] for s in states}
    return InformationStructure([1.0], [types], law)


class InterimFlowProfile:
    """Flows of every (population, type) block, in ``structure.block_keys()`` order.

    ``flows[i]`` is a vector over ``actions`` summing to the mass of the
    block's population.
    """

    def __init__(self, keys, masses, flows, actions):
        self.keys = [(int(k), str(t)) for k, t in keys]
        self.masses = np.asarray(masses, dtype=float)
        self.flows = np.array(flows, dtype=float)
        self.actions = tuple(actions)
        if self.flows.shape != (len(self.keys), len(self.actions)):
            raise ModelError("PROFILE_SHAPE", f"flows have shape {self.flows.shape}")
        if np.any(self.flows < -1e-10):
            raise ModelError("PROFILE_NEGATIVE", "negative interim flow")
        err = np.abs(self.flows.sum(axis=1) - self.masses)
        if np.any(err > 1e-10):
            bad = self.keys[int(np.argmax(err))]
            raise ModelError("PROFILE_MASS", f"block {bad} does not carry its population mass")
        self.flows = np.maximum(self.flows, 0.0)

    @classmethod
    def for_structure(cls, structure, flows, actions):
        keys = structure.block_keys()
        masses = [structure.population_sizes[k] for k, _ in keys]
        return cls(keys, masses, flows, actions)

    def flow(self, k, t):
        return self.flows[self.keys.index((int(k), str(t)))]

    def matches(self, structure):
        return self.keys == structure.block_keys()
