import copy
import json

import numpy as np
import pytest

from wardropdesign import io
from wardropdesign.bcwe import optimize_bcwe
from wardropdesign.design import build_direct_structure, obedient_profile, rational_approximation
from wardropdesign.errors import ModelError
from wardropdesign.model import FiniteOutcome
from wardropdesign.structure import public_structure


def load(fixtures_dir, name):
    return io.load_json(fixtures_dir / name)[0]


GAMES = ["example1_game.json", "example2_game.json"]
OUTCOMES = ["example1_bcwe.json", "example2_bcwe.json", "example2_violating.json"]


@pytest.mark.parametrize("name", GAMES)
def test_game_round_trip(fixtures_dir, name):
    doc = load(fixtures_dir, name)
    game = io.parse_game(doc)
    again = io.serialize_game(game)
    assert again == doc
    assert io.parse_game(again) == game


@pytest.mark.parametrize("name", OUTCOMES)
def test_outcome_round_trip(fixtures_dir, name):
    doc = load(fixtures_dir, name)
    out = io.parse_outcome(doc)
    assert io.serialize_outcome(out) == doc
    assert io.serialize_outcome(io.parse_outcome(io.serialize_outcome(out))) == doc


def test_fixture_files_match_builtin_games(fixtures_dir, game1, game2):
    assert io.parse_game(load(fixtures_dir, "example1_game.json")) == game1
    assert io.parse_game(load(fixtures_dir, "example2_game.json")) == game2


def test_example1_fixture_shape(fixtures_dir):
    game = io.parse_game(load(fixtures_dir, "example1_game.json"))
    assert len(game.states) == 2
    assert game.n_actions == 2
    assert all(len(a) == 1 for a in game.actions)


def test_rotation_structure_round_trip(game1):
    mu, _ = optimize_bcwe(game1, "social_cost", 6)
    S = build_direct_structure(mu, rational_approximation(mu.support_flows(), 0.0), game1)
    doc = io.serialize_structure(S)
    assert "rotation_symmetric" in doc["encoding"]
    T = io.parse_structure(json.loads(io.dump_json(doc)))
    assert io.serialize_structure(T) == doc
    for s in game1.states:
        assert dict(T.profiles(s)) == pytest.approx(dict(S.profiles(s)), abs=1e-15)


def test_rotation_structure_from_flows_only(game1):
    mu, _ = optimize_bcwe(game1, "social_cost", 6)
    S = build_direct_structure(mu, rational_approximation(mu.support_flows(), 0.0), game1)
    doc = io.serialize_structure(S)
    for items in doc["encoding"]["rotation_symmetric"]["per_state"].values():
        for it in items:
            del it["counts"]
    T = io.parse_structure(doc)
    assert io.serialize_structure(T) == io.serialize_structure(S)


def test_explicit_structure_round_trip(game1):
    S = public_structure(game1.states, {"low": {"x": 0.75, "y": 0.25}, "high": {"x": 0.5, "y": 0.5}})
    doc = io.serialize_structure(S)
    assert doc["encoding"] == "explicit"
    assert io.serialize_structure(io.parse_structure(doc)) == doc


def test_profile_round_trip(game1):
    mu, _ = optimize_bcwe(game1, "social_cost", 6)
    S = build_direct_structure(mu, rational_approximation(mu.support_flows(), 0.0), game1)
    prof = obedient_profile(S, game1)
    doc = io.serialize_profile(prof)
    back = io.parse_profile(json.loads(io.dump_json(doc)), S)
    assert back.keys == prof.keys
    assert np.array_equal(back.flows, prof.flows)


def test_floats_survive_text(tmp_path):
    x = 1 / 3 + 1e-17
    out = FiniteOutcome({"s": [([x, 1 - x], 1.0)]})
    io.dump_json(io.serialize_outcome(out), tmp_path / "o.json")
    back = io.parse_outcome(io.load_json(tmp_path / "o.json")[0])
    assert back.per_state["s"][0][0].entries[0] == out.per_state["s"][0][0].entries[0]


class TestDiagnostics:
    def test_prior_sum(self, fixtures_dir):
        doc = load(fixtures_dir, "example1_game.json")
        doc["prior"] = [0.6, 0.5]
        with pytest.raises(ModelError) as exc:
            io.parse_game(doc)
        assert exc.value.code == "PRIOR_SUM"

    def test_curve_discontinuous(self, fixtures_dir):
        doc = load(fixtures_dir, "example2_game.json")
        doc["costs"]["b"]["theta"]["pieces"][1] = [-1.0, 4.0]
        with pytest.raises(ModelError) as exc:
            io.parse_game(doc)
        assert exc.value.code == "CURVE_DISCONTINUOUS"
        assert exc.value.path == "/costs/b/theta"

    def test_missing_field(self, fixtures_dir):
        doc = load(fixtures_dir, "example1_game.json")
        del doc["prior"]
        with pytest.raises(ModelError) as exc:
            io.parse_game(doc)
        assert exc.value.code == "SCHEMA_MISSING"

    def test_wrong_type(self, fixtures_dir):
        doc = load(fixtures_dir, "example1_game.json")
        doc["prior"] = ["half", 0.5]
        with pytest.raises(ModelError) as exc:
            io.parse_game(doc)
        assert exc.value.code == "SCHEMA_TYPE"
        assert exc.value.path == "/prior"

    def test_unknown_state(self, fixtures_dir):
        doc = load(fixtures_dir, "example1_game.json")
        doc["costs"]["a"]["medium"] = copy.deepcopy(doc["costs"]["a"]["low"])
        with pytest.raises(ModelError) as exc:
            io.parse_game(doc)
        assert exc.value.code == "UNKNOWN_STATE"

    def test_invalid_flow(self, fixtures_dir):
        doc = load(fixtures_dir, "example2_violating.json")
        doc["per_state"]["theta"][0]["flow"] = [0.7, 0.7]
        with pytest.raises(ModelError) as exc:
            io.parse_outcome(doc)
        assert exc.value.code == "FLOW_INVALID"
        assert exc.value.path.startswith("/per_state/theta/0")

    def test_codes_are_distinct(self, fixtures_dir):
        codes = set()
        for mutate in (
            lambda d: d.__setitem__("prior", [0.6, 0.5]),
            lambda d: d["costs"]["b"]["low"].__setitem__("breakpoints", [0.0, 0.5, 1.0])
            or d["costs"]["b"]["low"].__setitem__("pieces", [[0.0, 1.0], [5.0, 1.0]]),
            lambda d: d.pop("actions"),
        ):
            doc = load(fixtures_dir, "example1_game.json")
            mutate(doc)
            with pytest.raises(ModelError) as exc:
                io.parse_game(doc)
            codes.add(exc.value.code)
        assert len(codes) == 3

    def test_bad_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(ModelError) as exc:
            io.load_json(p)
        assert exc.value.code == "JSON"

    def test_digest_is_content_hash(self, fixtures_dir):
        import hashlib

        path = fixtures_dir / "example1_game.json"
        assert io.load_json(path)[1] == hashlib.sha256(path.read_bytes()).hexdigest()
