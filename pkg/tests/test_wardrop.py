import numpy as np
import pytest

from wardropdesign.descent import DescentConfig, minimize_potential
from wardropdesign.auxiliary import complete_information
from wardropdesign.errors import ConvergenceError, DomainError, UnsupportedModelError
from wardropdesign.model import ConvexityClass, PiecewiseCostCurve, classify_potential, singleton_game
from wardropdesign.wardrop import (
    solve_average_wardrop,
    solve_wardrop,
    verify_wardrop,
    wardrop_descent,
)


def affine_game(rng, n, states=("s",)):
    curves = {}
    for s in states:
        for i in range(n):
            curves[(f"e{i}", s)] = PiecewiseCostCurve.polynomial([rng.uniform(0, 1), rng.uniform(0.2, 2)])
    return singleton_game(states, [1 / len(states)] * len(states), curves)


class TestVerify:
    def test_example2_equilibria(self, game2):
        for y in ([1, 0], [0.75, 0.25], [0.25, 0.75]):
            assert verify_wardrop(game2, y, "theta").gap == pytest.approx(0.0, abs=1e-12)

    def test_example2_non_equilibrium(self, game2):
        rep = verify_wardrop(game2, [0.6, 0.4], "theta")
        assert rep.gap == pytest.approx(0.6, abs=1e-12)
        assert rep.slacks["b"] == 0.0

    def test_unsupported_actions_ignored(self, game1):
        rep = verify_wardrop(game1, [1, 0], "low")
        assert rep.supported == (0,)
        assert rep.certified(0.0)


class TestSolve:
    def test_example1_high(self, game1):
        y = solve_wardrop(game1, "high").entries
        assert np.allclose(y, [2 / 3, 1 / 3], atol=1e-6)

    def test_example1_low(self, game1):
        assert np.allclose(solve_wardrop(game1, "low").entries, [1, 0], atol=1e-12)

    def test_single_action(self):
        g = singleton_game("s", [1.0], {("e", "s"): PiecewiseCostCurve.polynomial([0, 1])})
        assert solve_wardrop(g, "s").entries.tolist() == [1.0]

    def test_average_example1(self, game1):
        assert np.allclose(solve_average_wardrop(game1).entries, [11 / 12, 1 / 12], atol=1e-6)

    def test_average_of_identical_states(self):
        rng = np.random.default_rng(2)
        base = affine_game(rng, 3)
        curves = {(e, s): base.cost_curves[(e, "s")] for e in base.resources for s in ("u", "v")}
        twin = singleton_game(("u", "v"), [0.5, 0.5], curves)
        assert np.allclose(solve_average_wardrop(twin).entries, solve_wardrop(base, "s").entries, atol=1e-9)

    def test_degenerate_prior_continuity(self, game1):
        curves = game1.cost_curves
        g = singleton_game(("low", "high"), [1 - 1e-9, 1e-9], curves)
        assert np.allclose(solve_average_wardrop(g).entries, solve_wardrop(game1, "low").entries, atol=1e-6)

    def test_opposite_curves_average_to_constants(self):
        # c and -c across two equiprobable states: average costs are constant
        up = PiecewiseCostCurve.polynomial([0.0, 1.0])
        down = PiecewiseCostCurve.polynomial([0.0, -1.0])
        curves = {("a", "u"): up, ("a", "v"): down, ("b", "u"): up, ("b", "v"): down}
        g = singleton_game(("u", "v"), [0.5, 0.5], curves)
        assert classify_potential(g) is ConvexityClass.NON_CONVEX
        assert solve_average_wardrop(g).entries.tolist() == [1.0, 0.0]

    def test_non_convex_rejected(self, game2):
        with pytest.raises(UnsupportedModelError):
            solve_wardrop(game2, "theta")

    def test_iteration_cap_reports_best_gap(self):
        g = affine_game(np.random.default_rng(4), 4)
        with pytest.raises(ConvergenceError) as exc:
            wardrop_descent(g, "s", DescentConfig(target_gap=1e-14, max_iters=3, step_rule="open_loop"))
        assert exc.value.best_gap > 0
        assert exc.value.iterations == 3

    def test_config_validation(self):
        with pytest.raises(DomainError):
            DescentConfig(target_gap=0)
        with pytest.raises(DomainError):
            DescentConfig(step_rule="momentum")


@pytest.mark.parametrize("seed", range(5))
def test_duality_gap_bounds_wardrop_gap(seed):
    g = affine_game(np.random.default_rng(seed), 4)
    res = wardrop_descent(g, "s", DescentConfig(seed=seed))
    assert verify_wardrop(g, res.flows[0], "s").gap <= res.duality_gap + 1e-9 or res.wardrop_gap <= 1e-8
    assert verify_wardrop(g, res.flows[0], "s").gap <= 1e-8


@pytest.mark.parametrize("seed", range(5))
def test_uniqueness_under_strict_convexity(seed):
    g = affine_game(np.random.default_rng(100 + seed), 4)
    assert classify_potential(g) is ConvexityClass.STRICTLY_CONVEX_ON_SIMPLEX
    y1 = wardrop_descent(g, "s", DescentConfig(seed=1)).flows[0]
    y2 = wardrop_descent(g, "s", DescentConfig(seed=2)).flows[0]
    assert np.max(np.abs(y1 - y2)) <= 1e-5


@pytest.mark.parametrize("rule", ["projected", "pairwise", "open_loop"])
def test_potential_non_increasing(rule):
    g = affine_game(np.random.default_rng(9), 3)
    aux = complete_information(g, "s")
    gap = 1e-2 if rule == "open_loop" else 1e-6
    try:
        res = minimize_potential(aux, DescentConfig(seed=4, step_rule=rule, max_iters=5000, target_gap=gap))
        pots = res.potentials
    except ConvergenceError:
        pytest.fail("descent did not reach its target")
    assert all(b <= a + 1e-12 for a, b in zip(pots, pots[1:]))


def test_open_loop_rule_still_available(game1):
    res = wardrop_descent(game1, "high", DescentConfig(step_rule="open_loop", target_gap=1e-4))
    assert np.allclose(res.flows[0], [2 / 3, 1 / 3], atol=1e-3)


def test_rules_agree_on_designed_structure():
    from wardropdesign.auxiliary import build_auxiliary
    from wardropdesign.bcwe import fully_revealing_bcwe
    from wardropdesign.design import build_direct_structure, rational_approximation

    g = affine_game(np.random.default_rng(2), 3, states=("u", "v"))
    mu = fully_revealing_bcwe(g)
    aux = build_auxiliary(g, build_direct_structure(mu, rational_approximation(mu.support_flows(), 5e-2), g))
    F = []
    for rule in ("projected", "pairwise"):
        res = minimize_potential(aux, DescentConfig(seed=3, step_rule=rule, target_gap=1e-10))
        F.append(aux.total_flows(res.flows))
    # strictly convex: total flows per profile are unique even if block flows are not
    assert np.max(np.abs(F[0] - F[1])) <= 1e-6


def test_cost_jacobian_matches_differences():
    from wardropdesign.auxiliary import build_auxiliary
    from wardropdesign.bcwe import fully_revealing_bcwe
    from wardropdesign.design import build_direct_structure, rational_approximation

    rng = np.random.default_rng(0)
    g = affine_game(rng, 3, states=("u", "v"))
    mu = fully_revealing_bcwe(g)
    aux = build_auxiliary(g, build_direct_structure(mu, rational_approximation(mu.support_flows(), 1e-1), g))
    Y = aux.random_flows(rng)
    J = aux.cost_jacobian(Y)
    h = 1e-6
    base = aux.block_costs(Y).ravel()
    for i in rng.choice(Y.size, size=min(12, Y.size), replace=False):
        Z = Y.ravel().copy()
        Z[i] += h
        fd = (aux.block_costs(Z.reshape(Y.shape)).ravel() - base) / h
        assert np.max(np.abs(fd - J[:, i])) <= 1e-6


def test_projection_onto_scaled_simplices():
    from wardropdesign.descent import project_rows

    rng = np.random.default_rng(5)
    V = rng.normal(size=(50, 4))
    mass = rng.uniform(0.1, 2, size=50)
    X = project_rows(V, mass)
    assert np.all(X >= 0) and np.allclose(X.sum(axis=1), mass)
    # optimality: V - X is constant on the support and no larger off it
    for v, x in zip(V, X):
        r = v - x
        on = x > 0
        assert np.ptp(r[on]) <= 1e-12
        assert np.all(v[~on] <= r[on][0] + 1e-12)
