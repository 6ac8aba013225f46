import numpy as np
import pytest

from footplan import qp, simplex
from oracles import qp_by_dual_projection


def test_unconstrained_minimum():
    res = qp.solve_quadratic(2 * np.eye(2), np.array([-2.0, -4.0]))
    assert res.optimal
    assert res.x == pytest.approx([1.0, 2.0], abs=1e-8)


def test_projection_onto_halfline():
    res = qp.solve_quadratic(np.array([[2.0]]), np.array([0.0]),
                             A_ub=[[-1.0]], b_ub=[-3.0])
    assert res.optimal
    assert res.x[0] == pytest.approx(3.0, abs=1e-8)
    assert res.objective == pytest.approx(9.0, abs=1e-7)


def test_equality_pins_coordinate():
    res = qp.solve_quadratic(np.eye(2), np.zeros(2),
                             A_ub=[[-1.0, 0.0]], b_ub=[-3.0],
                             A_eq=[[0.0, 1.0]], b_eq=[5.0])
    assert res.x == pytest.approx([3.0, 5.0], abs=1e-8)


def test_infeasible_rows_detected():
    res = qp.solve_quadratic(np.eye(1), np.zeros(1),
                             A_ub=[[1.0], [-1.0]], b_ub=[0.0, -1.0])
    assert res.status == simplex.INFEASIBLE


def test_semidefinite_cost_is_accepted():
    # Flat direction in the objective, pinned by an active constraint.
    Q = np.diag([2.0, 0.0])
    res = qp.solve_quadratic(Q, np.array([0.0, 1.0]), A_ub=[[0.0, -1.0]],
                             b_ub=[0.0])
    assert res.optimal
    assert res.x[1] == pytest.approx(0.0, abs=1e-6)


@pytest.mark.parametrize("seed", range(12))
def test_matches_dual_projection_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(2, 9))
    m = int(rng.integers(2, 14))
    G = rng.normal(size=(n, n))
    Q = G @ G.T + np.eye(n)
    c = rng.normal(size=n)
    A = rng.normal(size=(m, n))
    b = A @ rng.normal(size=n) + rng.uniform(0.0, 1.0, m)
    res = qp.solve_quadratic(Q, c, A, b)
    assert res.optimal
    x_ref, obj_ref = qp_by_dual_projection(Q, c, A, b)
    assert res.objective == pytest.approx(obj_ref, abs=1e-6)
    assert np.max(A @ res.x - b) <= 1e-7


def test_deterministic():
    rng = np.random.default_rng(5)
    Q = np.eye(4)
    c = rng.normal(size=4)
    A = rng.normal(size=(9, 4))
    b = A @ rng.normal(size=4) + 0.3
    r1 = qp.solve_quadratic(Q, c, A, b)
    r2 = qp.solve_quadratic(Q, c, A, b)
    assert np.array_equal(r1.x, r2.x)
    assert r1.iterations == r2.iterations
