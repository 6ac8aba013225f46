import numpy as np
import pytest

from footplan import simplex
from oracles import lp_by_vertex_enumeration


def test_min_x_subject_to_lower_bound():
    res = simplex.solve_linear([1.0], A_ub=[[-1.0]], b_ub=[-1.0])
    assert res.optimal
    assert res.x[0] == pytest.approx(1.0, abs=1e-9)
    assert res.objective == pytest.approx(1.0, abs=1e-9)


def test_contradictory_rows_report_infeasible_as_data():
    res = simplex.solve_linear([0.0], A_ub=[[1.0], [-1.0]], b_ub=[0.0, -1.0])
    assert res.status == simplex.INFEASIBLE
    assert res.x is None


def test_unbounded_direction_detected():
    res = simplex.solve_linear([-1.0], A_ub=[[-1.0]], b_ub=[0.0])
    assert res.status == simplex.UNBOUNDED


def test_equalities_and_sign_constraints():
    # min x + y s.t. x + y = 2, x - y <= 0, both nonnegative
    res = simplex.solve_linear([1.0, 1.0], A_ub=[[1.0, -1.0]], b_ub=[0.0],
                               A_eq=[[1.0, 1.0]], b_eq=[2.0],
                               nonneg=[True, True])
    assert res.optimal
    assert res.objective == pytest.approx(2.0, abs=1e-9)


def test_degenerate_stack_terminates():
    # Many duplicated rows through the optimum exercise the Bland fallback.
    A = np.vstack([[-1.0, 0.0]] * 30 + [[0.0, -1.0]] * 30 + [[1.0, 1.0]])
    b = np.concatenate([np.zeros(60), [1.0]])
    res = simplex.solve_linear([-1.0, -2.0], A_ub=A, b_ub=b)
    assert res.optimal
    assert res.objective == pytest.approx(-2.0, abs=1e-8)


@pytest.mark.parametrize("seed", range(10))
def test_agrees_with_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    m = int(rng.integers(2, 10))
    A = rng.normal(size=(m, n))
    x0 = rng.normal(size=n)
    b = A @ x0 + rng.uniform(0.1, 1.0, size=m)
    box = np.vstack([np.eye(n), -np.eye(n)])
    box_b = 10.0 * np.ones(2 * n)
    c = rng.normal(size=n)
    A_ub = np.vstack([A, box])
    b_ub = np.concatenate([b, box_b])
    res = simplex.solve_linear(c, A_ub, b_ub)
    status, _, obj = lp_by_vertex_enumeration(c, A_ub, b_ub)
    assert res.status == status == "optimal"
    assert res.objective == pytest.approx(obj, abs=1e-7)


def test_deterministic_iterates():
    rng = np.random.default_rng(7)
    A = rng.normal(size=(12, 5))
    b = A @ rng.normal(size=5) + 0.5
    c = rng.normal(size=5)
    A_ub = np.vstack([A, np.eye(5), -np.eye(5)])
    b_ub = np.concatenate([b, 5 * np.ones(10)])
    r1 = simplex.solve_linear(c, A_ub, b_ub)
    r2 = simplex.solve_linear(c, A_ub, b_ub)
    assert r1.iterations == r2.iterations
    assert np.array_equal(r1.x, r2.x)


def test_feasibility_residual_of_optimum():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = int(rng.integers(2, 6))
        A = rng.normal(size=(8, n))
        b = A @ rng.normal(size=n) + rng.uniform(0.05, 0.5, 8)
        A_ub = np.vstack([A, np.eye(n), -np.eye(n)])
        b_ub = np.concatenate([b, 8 * np.ones(2 * n)])
        res = simplex.solve_linear(rng.normal(size=n), A_ub, b_ub)
        assert res.optimal
        assert np.max(A_ub @ res.x - b_ub) <= 1e-7
