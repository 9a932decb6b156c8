import numpy as np
import pytest
from scipy.optimize import linprog

from wardropdesign.errors import InfeasibleError, UnboundedError
from wardropdesign.simplex import linprog_bland


@pytest.mark.parametrize("seed", range(20))
def test_matches_reference_solver(seed):
    rng = np.random.default_rng(seed)
    n, m_ub, m_eq = 8, 4, 2
    A_ub = rng.normal(size=(m_ub, n))
    b_ub = rng.uniform(0.5, 2, m_ub)
    A_eq = np.abs(rng.normal(size=(m_eq, n)))
    b_eq = A_eq @ rng.dirichlet(np.ones(n))
    c = rng.normal(size=n)
    ref = linprog(c, A_ub, b_ub, A_eq, b_eq, method="highs")
    if ref.status == 2:
        with pytest.raises(InfeasibleError):
            linprog_bland(c, A_ub, b_ub, A_eq, b_eq)
    elif ref.status == 3:
        with pytest.raises(UnboundedError):
            linprog_bland(c, A_ub, b_ub, A_eq, b_eq)
    else:
        res = linprog_bland(c, A_ub, b_ub, A_eq, b_eq)
        assert res.value == pytest.approx(ref.fun, abs=1e-8)
        assert np.all(res.x >= 0)
        assert np.all(A_ub @ res.x <= b_ub + 1e-9)
        assert np.allclose(A_eq @ res.x, b_eq, atol=1e-9)


def test_infeasible_certificate():
    with pytest.raises(InfeasibleError) as exc:
        linprog_bland([1, 1], A_eq=[[1, 1]], b_eq=[-1])
    assert exc.value.certificate["phase1_residual"] > 0


def test_unbounded():
    with pytest.raises(UnboundedError):
        linprog_bland([-1, 0], A_ub=[[0, 1]], b_ub=[1])


def test_beale_cycling_example_terminates():
    # classical instance on which the largest-coefficient rule cycles
    c = [-0.75, 150, -0.02, 6]
    A = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]]
    b = [0, 0, 1]
    res = linprog_bland(c, A, b)
    assert res.value == pytest.approx(-0.05, abs=1e-12)


def test_redundant_equalities():
    res = linprog_bland([1, 2], A_eq=[[1, 1], [2, 2]], b_eq=[1, 2])
    assert res.value == pytest.approx(1.0)
    assert res.x.tolist() == pytest.approx([1.0, 0.0])
