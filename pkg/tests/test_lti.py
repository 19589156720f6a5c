import json

import numpy as np
import pytest

from resilient_sse import (
    DegenerateSvd,
    DimensionMismatch,
    LtiSystem,
    NotObservable,
    WindowOutOfRange,
    build_horizon,
    check_observability,
    load_system_csv,
    load_system_json,
    simulate,
    stack_window,
)
from conftest import make_system


def test_build_horizon_T1_is_identity_stacking():
    C = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    sys_ = LtiSystem(A=np.eye(2), C=C)
    model = build_horizon(sys_, 1)
    assert np.allclose(model.H, C)
    assert np.allclose(np.diag(model.Sigma1), np.linalg.svd(C, compute_uv=False))


def test_build_horizon_hand_example_newest_first():
    # x2 chain: window of two steps puts C*A above C
    sys_ = LtiSystem(A=[[0.0, 1.0], [0.0, 0.0]], C=[[1.0, 0.0]])
    model = build_horizon(sys_, 2)
    assert np.allclose(model.H, [[0.0, 1.0], [1.0, 0.0]])
    assert model.sigma_min > 0.99


def test_build_horizon_rejects_unobservable():
    sys_ = LtiSystem(A=np.eye(3), C=[[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 2.0, 0.0]])
    with pytest.raises(NotObservable):
        build_horizon(sys_, 2)


def test_build_horizon_short_window_degenerate():
    # observable pair, but a single step does not pin the state
    sys_ = LtiSystem(A=[[0.0, 1.0], [0.0, 0.0]], C=[[1.0, 0.0]])
    with pytest.raises(DegenerateSvd):
        build_horizon(sys_, 1)


def test_svd_factors_consistency():
    for seed in range(12):
        sys_ = make_system(seed, m=7, n=3)
        T = 1 + seed % 4
        model = build_horizon(sys_, T)
        U = np.hstack([model.U1, model.U2])
        assert np.max(np.abs(U.T @ U - np.eye(model.rows))) <= 1e-10
        recon = model.U1 @ model.Sigma1 @ model.V.T
        assert np.linalg.norm(recon - model.H) <= 1e-10 * np.linalg.norm(model.H)
        assert np.max(np.abs(model.U2.T @ model.H)) <= 1e-9
        assert np.all(np.diag(model.Sigma1) > 0)


def test_simulate_identity_and_growth():
    sys_ = LtiSystem(A=np.eye(2), C=np.vstack([np.eye(2), [1.0, 1.0]]))
    traj = simulate(sys_, [1.0, 2.0], 3)
    assert np.allclose(traj.states, [[1, 2]] * 3)

    doubling = LtiSystem(A=[[2.0]], C=[[1.0], [1.0]])
    traj = simulate(doubling, [1.0], 3)
    assert np.allclose(traj.states[:, 0], [1.0, 2.0, 4.0])


def test_simulate_attack_is_additive():
    sys_ = make_system(0)
    e = np.zeros(sys_.m)
    e[0] = 5.0
    traj = simulate(sys_, np.ones(sys_.n), 4, np.tile(e, (4, 1)))
    assert np.allclose(traj.attacked_measurements - traj.clean_measurements, np.tile(e, (4, 1)))


def test_simulate_shape_errors():
    sys_ = make_system(1)
    with pytest.raises(DimensionMismatch):
        simulate(sys_, np.ones(sys_.n + 1), 3)
    with pytest.raises(DimensionMismatch):
        simulate(sys_, np.ones(sys_.n), 3, np.zeros((3, sys_.m + 1)))


def test_stack_window_single_step_and_exactness():
    sys_ = make_system(2)
    traj = simulate(sys_, np.arange(1.0, sys_.n + 1), 5)
    y_T, x0, e_T = stack_window(traj, 3, 1)
    assert np.allclose(y_T, traj.attacked_measurements[3])
    assert np.allclose(x0, traj.states[3])
    assert np.allclose(e_T, 0.0)


def test_stack_window_matches_horizon_model():
    rng = np.random.default_rng(100)
    for seed in range(12):
        n = int(rng.integers(2, 7))
        m = int(rng.integers(n + 1, 13))
        sys_ = make_system(seed, m=m, n=n)
        T = int(rng.integers(1, 5))
        steps = T + 4
        attack = rng.standard_normal((steps, m)) * (rng.random((steps, m)) < 0.2)
        traj = simulate(sys_, rng.standard_normal(n), steps, attack)
        model = build_horizon(sys_, T)
        for end in range(T - 1, steps):
            y_T, x_start, e_T = stack_window(traj, end, T)
            assert np.max(np.abs(y_T - model.H @ x_start - e_T)) <= 1e-9


def test_stack_window_hand_stack():
    sys_ = LtiSystem(A=[[2.0]], C=[[1.0], [3.0]])
    traj = simulate(sys_, [1.0], 3)
    y_T, x0, _ = stack_window(traj, 1, 2)
    # newest first: measurements of x=2 on top, x=1 below
    assert np.allclose(y_T, [2.0, 6.0, 1.0, 3.0])
    assert np.allclose(x0, [1.0])


def test_stack_window_range_errors():
    sys_ = make_system(3)
    traj = simulate(sys_, np.ones(sys_.n), 4)
    with pytest.raises(WindowOutOfRange):
        stack_window(traj, 1, 3)
    with pytest.raises(WindowOutOfRange):
        stack_window(traj, 4, 1)


def test_check_observability_reports():
    n = 3
    full = LtiSystem(A=np.eye(n), C=np.vstack([np.eye(n), np.ones(n)]))
    report = check_observability(full)
    assert report.rank == n and report.observable

    blind = LtiSystem(A=np.eye(n), C=np.zeros((n + 1, n)))
    report = check_observability(blind)
    assert report.rank == 0 and not report.observable
    assert report.sigma_min_nonzero == 0.0

    chain = LtiSystem(A=[[0.0, 1.0], [0.0, 0.0]], C=[[1.0, 0.0]])
    assert check_observability(chain).rank == 2


def test_system_shape_validation():
    with pytest.raises(DimensionMismatch):
        LtiSystem(A=np.ones((2, 3)), C=np.ones((4, 3)))
    with pytest.raises(DimensionMismatch):
        LtiSystem(A=np.eye(2), C=np.ones((4, 3)))


def test_json_roundtrip(tmp_path):
    sys_ = make_system(4)
    path = tmp_path / "sys.json"
    path.write_text(json.dumps({"A": sys_.A.tolist(), "C": sys_.C.tolist(), "x0": [1.0] * sys_.n}))
    loaded, x0 = load_system_json(path)
    assert np.allclose(loaded.A, sys_.A) and np.allclose(loaded.C, sys_.C)
    assert np.allclose(x0, 1.0)


def test_json_rejects_ragged_rows(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"A": [[1, 0], [0]], "C": [[1, 0]]}')
    with pytest.raises(ValueError, match="inconsistent"):
        load_system_json(path)


def test_csv_roundtrip_and_ragged(tmp_path):
    a_path, c_path = tmp_path / "a.csv", tmp_path / "c.csv"
    a_path.write_text("0.5,0.1\n0.0,0.2\n")
    c_path.write_text("1,0\n0,1\n1,1\n")
    sys_ = load_system_csv(a_path, c_path)
    assert sys_.n == 2 and sys_.m == 3

    c_path.write_text("1,0\n0\n")
    with pytest.raises(ValueError, match="inconsistent"):
        load_system_csv(a_path, c_path)
