"""Least-squares identification, full order and projected."""
import numpy as np
import pytest

from conftest import random_linear_system
from omdc import dmdc, linalg, rom, store
from omdc.exceptions import RankError


def test_scalar_system_recovers_coefficients():
    # x_{k+1} = 0.5 x_k + u_k
    u = np.array([[1.0, -1.0, 2.0, 0.5]])
    x = np.empty((1, 5))
    x[0, 0] = 1.0
    for k in range(4):
        x[0, k + 1] = 0.5 * x[0, k] + u[0, k]
    full = dmdc.dmdc_full(x[:, :-1], x[:, 1:], u)
    assert full.dynamics_matrix()[0, 0] == pytest.approx(0.5, abs=1e-10)
    assert full.input_matrix()[0, 0] == pytest.approx(1.0, abs=1e-10)


def test_recovers_random_system(rng):
    a, b, s, u = random_linear_system(rng, 6, 2, 30)
    x, y = store.split_snapshots(s)
    full = dmdc.dmdc_full(x, y, u)
    assert np.linalg.norm(full.dynamics_matrix() - a) <= 1e-8 * np.linalg.norm(a)
    assert np.linalg.norm(full.input_matrix() - b) <= 1e-8 * np.linalg.norm(b)


def test_zero_input_reduces_to_autonomous_fit(rng):
    a, _, s, _ = random_linear_system(rng, 5, 1, 25)
    # regenerate without input forcing
    s = np.empty((5, 25))
    s[:, 0] = rng.standard_normal(5)
    for k in range(24):
        s[:, k + 1] = a @ s[:, k]
    x, y = store.split_snapshots(s)
    full = dmdc.dmdc_full(x, y, np.zeros((1, 24)))
    assert np.allclose(full.input_matrix(), 0.0, atol=1e-10)
    autonomous = linalg.solve_ls(y, x)
    assert np.allclose(full.dynamics_matrix(), autonomous, atol=1e-9)


def test_residual_matches_normal_equations(rng):
    # noisy data, so the fit is not exact and the residual is meaningful
    _, _, s, u = random_linear_system(rng, 4, 2, 40)
    s = s + 0.01 * rng.standard_normal(s.shape)
    x, y = store.split_snapshots(s)
    full = dmdc.dmdc_full(x, y, u)
    omega = store.stack_omega(x, u)
    oracle = np.linalg.solve(omega @ omega.T, omega @ y.T).T
    fitted = np.hstack([full.dynamics_matrix(), full.input_matrix()])
    res = np.linalg.norm(y - fitted @ omega)
    res_oracle = np.linalg.norm(y - oracle @ omega)
    assert abs(res - res_oracle) <= 1e-9 * max(res_oracle, 1.0)


def test_apply_dynamics_avoids_materializing(rng):
    _, _, s, u = random_linear_system(rng, 6, 2, 30)
    x, y = store.split_snapshots(s)
    full = dmdc.dmdc_full(x, y, u)
    v = rng.standard_normal(6)
    assert np.allclose(full.apply_dynamics(v), full.dynamics_matrix() @ v, atol=1e-12)


def test_lossless_projection_at_full_rank(rng):
    # r = rank(Y): the projected operator must represent A exactly on the modes
    a, b, s, u = random_linear_system(rng, 5, 2, 30)
    x, y = store.split_snapshots(s)
    r = np.linalg.matrix_rank(y)
    red = dmdc.dmdc_reduced(x, y, u, r)
    phi = red.modes
    assert np.linalg.norm(red.dynamics - phi.T @ a @ phi) <= 1e-9 * np.linalg.norm(a)
    assert np.linalg.norm(red.input_map - phi.T @ b) <= 1e-9 * np.linalg.norm(b)


def test_projection_consistency_with_full_operators(rng):
    _, _, s, u = random_linear_system(rng, 7, 2, 35)
    s = s + 0.05 * rng.standard_normal(s.shape)
    x, y = store.split_snapshots(s)
    full = dmdc.dmdc_full(x, y, u)
    red = dmdc.dmdc_reduced(x, y, u, 3)
    phi = red.modes
    assert np.allclose(
        red.dynamics, phi.T @ full.dynamics_matrix() @ phi, atol=1e-9
    )
    assert np.allclose(red.input_map, phi.T @ full.input_matrix(), atol=1e-9)


def test_modes_are_orthonormal(rng):
    _, _, s, u = random_linear_system(rng, 6, 2, 30)
    x, y = store.split_snapshots(s)
    red = dmdc.dmdc_reduced(x, y, u, 2)
    assert np.allclose(red.modes.T @ red.modes, np.eye(2), atol=1e-12)


def test_rank_request_beyond_data_rank_raises(rng):
    _, _, s, u = random_linear_system(rng, 4, 1, 20)
    x, y = store.split_snapshots(s)
    with pytest.raises(RankError):
        dmdc.dmdc_reduced(x, y, u, 5)


def test_as_rom_replays_training_data(rng):
    a, b, s, u = random_linear_system(rng, 5, 2, 30)
    x, y = store.split_snapshots(s)
    r = np.linalg.matrix_rank(y)
    model = dmdc.as_rom(dmdc.dmdc_reduced(x, y, u, r), dt_sample=1.0)
    traj = rom.simulate(model, s[:, 0], u)
    replay = rom.lift(model, traj.coeffs)
    assert np.linalg.norm(replay - s) <= 1e-8 * np.linalg.norm(s)
