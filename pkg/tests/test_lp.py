import numpy as np
import pytest
from scipy.optimize import linprog

from resilient_sse import RankDeficient
from resilient_sse.lp import weighted_l1_regression


def line_search_oracle(column, y, w):
    """1-D weighted l1 minimizer by breakpoint enumeration.

    For a single column the objective is piecewise linear in z with kinks
    exactly at z = y_j / a_j, so scanning the kinks is exhaustive.
    """
    kinks = [yj / aj for yj, aj in zip(y, column) if aj != 0]
    best = min(kinks, key=lambda z: float(w @ np.abs(y - column * z)))
    return best, float(w @ np.abs(y - column * best))


def scipy_oracle(A, y, w):
    N, n = A.shape
    c = np.concatenate([np.zeros(n), w])
    I = np.eye(N)
    res = linprog(
        c,
        A_ub=np.block([[A, -I], [-A, -I]]),
        b_ub=np.concatenate([y, -y]),
        bounds=[(None, None)] * (n + N),
        method="highs",
    )
    assert res.success, res.message
    return res.fun


def test_unit_weight_median_outvotes_one_attacker():
    A = np.array([[1.0], [1.0], [1.0]])
    y = np.array([1.0, 1.0, 5.0])
    sol = weighted_l1_regression(A, y, np.ones(3))
    z_star, obj_star = line_search_oracle(A[:, 0], y, np.ones(3))
    assert z_star == 1.0 and obj_star == 4.0
    assert abs(sol.z[0] - 1.0) <= 1e-9
    assert abs(sol.objective - 4.0) <= 1e-8


def test_small_weights_restore_truth_under_majority_attack():
    A = np.array([[1.0], [1.0], [1.0]])
    y = np.array([5.0, 5.0, 1.0])
    w = np.array([0.1, 0.1, 1.0])
    sol = weighted_l1_regression(A, y, w)
    z_star, obj_star = line_search_oracle(A[:, 0], y, w)
    assert z_star == 1.0
    assert abs(sol.z[0] - z_star) <= 1e-9
    assert abs(sol.objective - obj_star) <= 1e-8


def test_consistent_data_gives_zero_objective():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((12, 4))
    x = rng.standard_normal(4)
    sol = weighted_l1_regression(A, A @ x, rng.uniform(0.1, 1.0, 12))
    assert sol.objective <= 1e-10
    assert np.linalg.norm(sol.z - x) <= 1e-9


@pytest.mark.parametrize("seed", range(30))
def test_matches_scipy_linprog(seed):
    rng = np.random.default_rng(seed)
    N, n = 18, 5
    A = rng.standard_normal((N, n))
    y = A @ rng.standard_normal(n)
    k = rng.integers(0, 7)
    y[rng.choice(N, size=k, replace=False)] += 8 * rng.standard_normal(k)
    w = rng.uniform(0.01, 1.0, N)
    if seed % 4 == 0:
        w[rng.choice(N, size=2, replace=False)] = 0.0
    sol = weighted_l1_regression(A, y, w)
    assert abs(sol.objective - scipy_oracle(A, y, w)) <= 1e-7 * (1 + abs(sol.objective))
    assert sol.gap <= 1e-8 * (1 + abs(sol.objective)) + 1e-15
    assert sol.dual_objective <= sol.objective + 1e-12


def test_certificate_fields_are_consistent():
    rng = np.random.default_rng(11)
    A = rng.standard_normal((15, 4))
    y = rng.standard_normal(15)
    w = rng.uniform(0.2, 1.0, 15)
    sol = weighted_l1_regression(A, y, w)
    assert np.allclose(sol.residual, y - A @ sol.z)
    assert abs(sol.objective - float(w @ np.abs(sol.residual))) <= 1e-10
    assert abs(sol.gap - (sol.objective - sol.dual_objective)) <= 1e-12


def test_objective_never_exceeds_true_state_value():
    # the true state is always feasible, so the solve must do at least as well
    rng = np.random.default_rng(7)
    for _ in range(20):
        A = rng.standard_normal((16, 6))
        x = rng.standard_normal(6)
        y = A @ x
        k = rng.integers(1, 6)
        y[rng.choice(16, size=k, replace=False)] += 5 * rng.standard_normal(k)
        w = rng.uniform(0.05, 1.0, 16)
        sol = weighted_l1_regression(A, y, w)
        assert sol.objective <= float(w @ np.abs(y - A @ x)) + 1e-8


def test_zero_weights_need_rank():
    rng = np.random.default_rng(5)
    A = rng.standard_normal((8, 4))
    y = rng.standard_normal(8)
    w = np.ones(8)
    w[:5] = 0.0  # only 3 active rows for 4 unknowns
    with pytest.raises(RankDeficient):
        weighted_l1_regression(A, y, w)
    with pytest.raises(RankDeficient):
        weighted_l1_regression(A, y, np.zeros(8))


def test_zero_weight_rows_are_ignored():
    rng = np.random.default_rng(9)
    A = rng.standard_normal((10, 3))
    x = rng.standard_normal(3)
    y = A @ x
    y[0] += 100.0  # corrupted row carries no weight
    w = np.ones(10)
    w[0] = 0.0
    sol = weighted_l1_regression(A, y, w)
    assert np.linalg.norm(sol.z - x) <= 1e-8


def test_shape_and_weight_validation():
    A = np.ones((4, 2))
    with pytest.raises(ValueError):
        weighted_l1_regression(A, np.ones(3), np.ones(4))
    with pytest.raises(ValueError):
        weighted_l1_regression(A, np.ones(4), -np.ones(4))
