from fractions import Fraction as Fr
from math import comb

import numpy as np
import pytest

from oracles import bcwe_lp_vertices, ex1_costs, ex2_costs, obedience_pairs
from wardropdesign.bcwe import (
    FlowGrid,
    fully_revealing_bcwe,
    non_revealing_bcwe,
    optimize_bcwe,
    verify_bcwe,
)
from wardropdesign.errors import DomainError, InfeasibleError
from wardropdesign.model import FiniteOutcome, PiecewiseCostCurve, expected_social_cost, singleton_game

EX1_OPT = {"low": [((Fr(1), Fr(0)), Fr(1))], "high": [((Fr(5, 6), Fr(1, 6)), Fr(1))]}
EX2_OPT = {"theta": [((Fr(1), Fr(0)), Fr(1, 3)), ((Fr(1, 2), Fr(1, 2)), Fr(2, 3))]}


def as_outcome(exact):
    return FiniteOutcome({s: [([float(v) for v in y], float(p)) for y, p in atoms] for s, atoms in exact.items()})


class TestVerify:
    def test_example1_pairs_against_oracle(self, game1):
        ref = obedience_pairs(EX1_OPT, [Fr(1, 2)] * 2, ex1_costs, ["low", "high"])
        rep = verify_bcwe(game1, as_outcome(EX1_OPT))
        for (a, b), (lhs, rhs) in ref.items():
            got = rep.pair("ab"[a], "ab"[b])
            assert got == pytest.approx((float(lhs), float(rhs)), abs=1e-12)
        assert rep.certified(0.0)

    def test_example2_pairs(self, game2):
        rep = verify_bcwe(game2, as_outcome(EX2_OPT))
        assert rep.pair("a", "b") == pytest.approx((2 / 3, 2 / 3), abs=1e-12)
        assert rep.pair("b", "a") == pytest.approx((0.0, 1 / 3), abs=1e-12)
        assert rep.certified(1e-12)

    def test_violation(self, game2):
        rep = verify_bcwe(game2, FiniteOutcome({"theta": [([0.6, 0.4], 1.0)]}))
        assert rep.pair("a", "b") == pytest.approx((0.6, 0.24), abs=1e-12)
        assert rep.violation == pytest.approx(0.36, abs=1e-12)
        assert not rep.certified(1e-8)

    def test_covers_all_pairs(self, game1):
        rep = verify_bcwe(game1, as_outcome(EX1_OPT))
        assert rep.lhs.shape == rep.rhs.shape == (2, 2)
        assert np.all(np.isfinite(rep.slack))


class TestGrid:
    @pytest.mark.parametrize("D,n", [(1, 2), (6, 2), (4, 3), (3, 4)])
    def test_size_and_sums(self, D, n):
        g = FlowGrid(D, n)
        assert len(g) == comb(D + n - 1, n - 1)
        assert np.all(g.counts.sum(axis=1) == D)
        assert [tuple(r) for r in g.counts] == sorted(tuple(r) for r in g.counts)

    def test_rejects_zero(self):
        with pytest.raises(DomainError):
            FlowGrid(0, 2)


class TestOptimize:
    def test_example1_d6(self, game1):
        mu, value = optimize_bcwe(game1, "social_cost", 6)
        ref, *_ = bcwe_lp_vertices(["low", "high"], [Fr(1, 2)] * 2, ex1_costs, 6)
        assert ref == Fr(17, 36)
        assert value == pytest.approx(17 / 36, abs=1e-9)
        assert [a[0].entries.tolist() for a in mu.atoms("low")] == [[1.0, 0.0]]
        assert np.allclose([a[0].entries for a in mu.atoms("high")], [[5 / 6, 1 / 6]], atol=1e-12)

    def test_example2_d2(self, game2):
        mu, value = optimize_bcwe(game2, "social_cost", 2)
        assert value == pytest.approx(2 / 3, abs=1e-12)
        atoms = sorted((tuple(f.entries), p) for f, p in mu.atoms("theta"))
        assert np.allclose([a[0] for a in atoms], [[0.5, 0.5], [1.0, 0.0]])
        assert np.allclose([a[1] for a in atoms], [2 / 3, 1 / 3])

    def test_constant_objective(self, game1):
        _, value = optimize_bcwe(game1, {s: np.full(7, 2.5) for s in game1.states}, 6)
        assert value == pytest.approx(2.5, abs=1e-12)

    def test_maximization_by_negation(self, game1):
        mu, value = optimize_bcwe(game1, "neg_social_cost", 6)
        ref, *_ = bcwe_lp_vertices(
            ["low", "high"], [Fr(1, 2)] * 2, ex1_costs, 6,
            objective=lambda y, s: -sum(a * c for a, c in zip(y, ex1_costs(y, s))),
        )
        assert value == pytest.approx(float(ref), abs=1e-9)
        assert -value == pytest.approx(expected_social_cost(game1, mu), abs=1e-9)

    def test_callable_objective(self, game1):
        _, v1 = optimize_bcwe(game1, lambda y, s: float(game1.social_costs(y, s)), 6)
        assert v1 == pytest.approx(17 / 36, abs=1e-9)

    def test_table_shape_checked(self, game1):
        with pytest.raises(DomainError):
            optimize_bcwe(game1, {s: np.zeros(3) for s in game1.states}, 6)

    @pytest.mark.parametrize("D", [1, 2, 3, 4, 6])
    def test_example2_against_vertex_oracle(self, game2, D):
        ref, *_ = bcwe_lp_vertices(["theta"], [Fr(1)], ex2_costs, D)
        _, value = optimize_bcwe(game2, "social_cost", D)
        assert value == pytest.approx(float(ref), abs=1e-9)

    def test_infeasible_grid_reports_certificate(self, game1):
        ref, *_ = bcwe_lp_vertices(["low", "high"], [Fr(1, 2)] * 2, ex1_costs, 2)
        assert ref is None
        with pytest.raises(InfeasibleError) as exc:
            optimize_bcwe(game1, "social_cost", 2)
        assert exc.value.certificate["phase1_residual"] > 0

    @pytest.mark.parametrize("D", [3, 6])
    def test_dominates_sampled_bcwe(self, game1, D):
        """LP optimum is below every obedient grid distribution found by rejection sampling."""
        _, value = optimize_bcwe(game1, "social_cost", D)
        grid = FlowGrid(D, 2)
        rng = np.random.default_rng(D)
        accepted = 0
        for _ in range(1000):
            per = {}
            for s in game1.states:
                k = rng.integers(1, 3)
                idx = rng.choice(len(grid), size=k, replace=False)
                per[s] = list(zip(grid.points[idx], rng.dirichlet(np.ones(k))))
            mu = FiniteOutcome(per)
            if verify_bcwe(game1, mu).certified(0.0):
                accepted += 1
                assert value <= expected_social_cost(game1, mu) + 1e-9
        assert accepted > 0

    @pytest.mark.parametrize("which,D", [(1, 3), (1, 6), (2, 1), (2, 2), (2, 3)])
    def test_refinement_monotone(self, game1, game2, which, D):
        for g in ([game1] if which == 1 else [game2]):
            _, coarse = optimize_bcwe(g, "social_cost", D)
            _, fine = optimize_bcwe(g, "social_cost", 2 * D)
            assert fine <= coarse + 1e-9

    def test_three_actions_feasible(self):
        # state equilibria (7/12, 1/3, 1/12) and (1/5, 2/5, 2/5) both lie on the 1/60 grid
        curves = {}
        for i, e in enumerate("xyz"):
            curves[(e, "u")] = PiecewiseCostCurve.polynomial([0.25 * i, 1.0])
            curves[(e, "v")] = PiecewiseCostCurve.polynomial([0.0, 2.0 if e == "x" else 1.0])
        g = singleton_game("uv", [0.4, 0.6], curves)
        mu, value = optimize_bcwe(g, "social_cost", 60)
        assert verify_bcwe(g, mu).certified(1e-8)
        assert value == pytest.approx(expected_social_cost(g, mu), abs=1e-9)


class TestCanonical:
    def test_fully_revealing_example1(self, game1):
        mu = fully_revealing_bcwe(game1)
        assert np.allclose(mu.atoms("low")[0][0].entries, [1, 0])
        assert np.allclose(mu.atoms("high")[0][0].entries, [2 / 3, 1 / 3], atol=1e-6)

    def test_non_revealing_example1(self, game1):
        mu = non_revealing_bcwe(game1)
        for s in game1.states:
            assert np.allclose(mu.atoms(s)[0][0].entries, [11 / 12, 1 / 12], atol=1e-6)

    def test_single_state_coincide(self):
        g = singleton_game("s", [1.0], {(e, "s"): PiecewiseCostCurve.polynomial([i, 1.0]) for i, e in enumerate("ab")})
        a = fully_revealing_bcwe(g).atoms("s")[0][0].entries
        b = non_revealing_bcwe(g).atoms("s")[0][0].entries
        assert np.allclose(a, b, atol=1e-9)

    def test_identical_states_state_independent(self):
        curves = {(e, s): PiecewiseCostCurve.polynomial([i, 1.0]) for i, e in enumerate("ab") for s in "uv"}
        mu = fully_revealing_bcwe(singleton_game("uv", [0.5, 0.5], curves))
        assert np.allclose(mu.atoms("u")[0][0].entries, mu.atoms("v")[0][0].entries, atol=1e-9)
