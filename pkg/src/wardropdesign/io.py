"""JSON documents for games, outcomes, information structures and interim profiles.

Parsers validate shape first and report the offending path with a stable
diagnostic code; semantic checks are delegated to the model constructors,
whose codes (``PRIOR_SUM``, ``CURVE_DISCONTINUOUS``, ...) pass through.
Floats are written by ``json`` with ``repr``, which round-trips exactly.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import DomainError, ModelError
from .model import CongestionGame, FiniteOutcome, FlowProfile, PiecewiseCostCurve
from .structure import InformationStructure, InterimFlowProfile, RotationEncoding


def _need(doc, key, kind, path):
    if not isinstance(doc, dict) or key not in doc:
        raise ModelError("SCHEMA_MISSING", f"missing field {key!r}", path)
    val = doc[key]
    if not isinstance(val, kind):
        raise ModelError("SCHEMA_TYPE", f"field {key!r} should be {_kind_name(kind)}", f"{path}/{key}")
    return val


def _kind_name(kind):
    names = {list: "a list", dict: "an object", str: "a string", int: "an integer"}
    if isinstance(kind, tuple):
        return "a number"
    return names.get(kind, kind.__name__)


NUMBER = (int, float)


def _numbers(vals, path):
    if not isinstance(vals, list) or not all(isinstance(v, NUMBER) and not isinstance(v, bool) for v in vals):
        raise ModelError("SCHEMA_TYPE", "expected a list of numbers", path)
    return [float(v) for v in vals]


def _located(fn, path):
    try:
        return fn()
    except ModelError as exc:
        if exc.path:
            raise
        raise ModelError(exc.code, str(exc).split(": ", 1)[-1], path) from None
    except DomainError as exc:
        raise ModelError("FLOW_INVALID", str(exc), path) from None


def load_json(path):
    """Read a JSON document; returns ``(document, sha256 hex digest)``."""
    raw = Path(path).read_bytes()
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelError("JSON", str(exc), str(path)) from None
    return doc, hashlib.sha256(raw).hexdigest()


def dump_json(doc, path=None):
    text = json.dumps(doc, indent=2, sort_keys=False, ensure_ascii=False) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


# games

def parse_curve(doc, path):
    bp = _numbers(_need(doc, "breakpoints", list, path), f"{path}/breakpoints")
    pieces = _need(doc, "pieces", list, path)
    coefs = [_numbers(p, f"{path}/pieces/{i}") for i, p in enumerate(pieces)]
    return _located(lambda: PiecewiseCostCurve(bp, coefs), path)


def parse_game(doc) -> CongestionGame:
    if not isinstance(doc, dict):
        raise ModelError("SCHEMA_TYPE", "game document must be an object", "/")
    states = _need(doc, "states", list, "")
    prior = _numbers(_need(doc, "prior", list, ""), "/prior")
    resources = _need(doc, "resources", list, "")
    actions = _need(doc, "actions", list, "")
    costs = _need(doc, "costs", dict, "")
    for i, a in enumerate(actions):
        if not isinstance(a, list) or not all(isinstance(e, str) for e in a):
            raise ModelError("SCHEMA_TYPE", "action must be a list of resource labels", f"/actions/{i}")
    curves = {}
    for e, per in costs.items():
        if e not in resources:
            raise ModelError("UNKNOWN_RESOURCE", f"costs given for unknown resource {e!r}", f"/costs/{e}")
        if not isinstance(per, dict):
            raise ModelError("SCHEMA_TYPE", "expected an object keyed by state", f"/costs/{e}")
        for s, cdoc in per.items():
            if s not in states:
                raise ModelError("UNKNOWN_STATE", f"cost curve for unknown state {s!r}", f"/costs/{e}/{s}")
            curves[(e, s)] = parse_curve(cdoc, f"/costs/{e}/{s}")
    labels = doc.get("action_labels")
    return _located(lambda: CongestionGame(states, prior, resources, actions, curves, labels), "/")


def serialize_game(game: CongestionGame) -> dict:
    doc = {
        "states": list(game.states),
        "prior": [float(p) for p in game.prior],
        "resources": list(game.resources),
        "actions": [list(a) for a in game.actions],
        "costs": {
            e: {s: game.cost_curves[(e, s)].to_dict() for s in game.states} for e in game.resources
        },
    }
    default = [a[0] if len(a) == 1 else "+".join(a) for a in game.actions]
    if list(game.action_labels) != default:
        doc["action_labels"] = list(game.action_labels)
    return doc


# outcomes

def parse_outcome(doc) -> FiniteOutcome:
    per = _need(doc, "per_state", dict, "")
    out = {}
    for s, atoms in per.items():
        if not isinstance(atoms, list):
            raise ModelError("SCHEMA_TYPE", "expected a list of atoms", f"/per_state/{s}")
        items = []
        for i, atom in enumerate(atoms):
            p = f"/per_state/{s}/{i}"
            flow = _numbers(_need(atom, "flow", list, p), f"{p}/flow")
            prob = _need(atom, "prob", NUMBER, p)
            items.append((_located(lambda: FlowProfile.unit(flow), p), float(prob)))
        out[s] = items
    return _located(lambda: FiniteOutcome(out), "/per_state")


def serialize_outcome(outcome: FiniteOutcome) -> dict:
    return {
        "per_state": {
            s: [{"flow": [float(v) for v in f.entries], "prob": float(p)} for f, p in atoms]
            for s, atoms in outcome.per_state.items()
        }
    }


# information structures

def parse_structure(doc) -> InformationStructure:
    sizes = _numbers(_need(doc, "population_sizes", list, ""), "/population_sizes")
    types = _need(doc, "type_sets", list, "")
    enc = doc.get("encoding", "explicit") if isinstance(doc, dict) else "explicit"
    if enc == "explicit":
        law_doc = _need(doc, "signal_law", dict, "")
        law = {}
        for s, items in law_doc.items():
            if not isinstance(items, list):
                raise ModelError("SCHEMA_TYPE", "expected a list", f"/signal_law/{s}")
            law[s] = []
            for i, it in enumerate(items):
                p = f"/signal_law/{s}/{i}"
                prof = _need(it, "profile", list, p)
                law[s].append((prof, float(_need(it, "prob", NUMBER, p))))
        return _located(lambda: InformationStructure(sizes, types, law), "/")
    if isinstance(enc, dict) and "rotation_symmetric" in enc:
        rdoc = enc["rotation_symmetric"]
        p = "/encoding/rotation_symmetric"
        K = _need(rdoc, "K", int, p)
        actions = _need(rdoc, "actions", list, p)
        per = {}
        for s, items in _need(rdoc, "per_state", dict, p).items():
            per[s] = []
            for i, it in enumerate(items):
                q = f"{p}/per_state/{s}/{i}"
                if "counts" in it:
                    counts = tuple(int(c) for c in _need(it, "counts", list, q))
                else:
                    flow = _numbers(_need(it, "flow", list, q), f"{q}/flow")
                    counts = tuple(int(round(v * K)) for v in flow)
                per[s].append((counts, float(_need(it, "prob", NUMBER, q))))
        renc = RotationEncoding(K, tuple(str(a) for a in actions), per)
        return _located(lambda: InformationStructure(sizes, types, encoding=renc), "/")
    raise ModelError("SCHEMA_TYPE", f"unknown encoding {enc!r}", "/encoding")


def serialize_structure(structure: InformationStructure) -> dict:
    doc = {
        "population_sizes": [float(g) for g in structure.population_sizes],
        "type_sets": [list(ts) for ts in structure.type_sets],
    }
    if structure.is_rotation:
        enc = structure.encoding
        doc["encoding"] = {
            "rotation_symmetric": {
                "K": enc.K,
                "actions": list(enc.actions),
                "per_state": {
                    s: [
                        {"counts": list(c), "flow": [x / enc.K for x in c], "prob": float(p)}
                        for c, p in items
                    ]
                    for s, items in enc.per_state.items()
                },
            }
        }
    else:
        doc["encoding"] = "explicit"
        doc["signal_law"] = {
            s: [{"profile": list(prof), "prob": float(p)} for prof, p in items]
            for s, items in structure.signal_law.items()
        }
    return doc


# interim profiles

def _block_key(text, path):
    k, sep, t = text.partition(":")
    if not sep or not k.isdigit():
        raise ModelError("SCHEMA_KEY", f"profile key {text!r} is not of the form 'k:type'", path)
    return int(k), t


def parse_profile(doc, structure: InformationStructure) -> InterimFlowProfile:
    actions = _need(doc, "actions", list, "")
    flows = _need(doc, "profiles", dict, "")
    given = {_block_key(key, f"/profiles/{key}"): _numbers(v, f"/profiles/{key}") for key, v in flows.items()}
    keys = structure.block_keys()
    missing = [k for k in keys if k not in given]
    if missing:
        raise ModelError("PROFILE_BLOCKS", f"no flow for blocks {missing[:3]}", "/profiles")
    extra = [k for k in given if k not in keys]
    if extra:
        raise ModelError("PROFILE_BLOCKS", f"unknown blocks {extra[:3]}", "/profiles")
    mat = np.array([given[k] for k in keys])
    return _located(lambda: InterimFlowProfile.for_structure(structure, mat, actions), "/profiles")


def serialize_profile(profile: InterimFlowProfile) -> dict:
    return {
        "actions": list(profile.actions),
        "profiles": {f"{k}:{t}": [float(v) for v in row] for (k, t), row in zip(profile.keys, profile.flows)},
    }
