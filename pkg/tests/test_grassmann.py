"""Geodesics, parallel transport, and the conjugate-gradient loop."""
import numpy as np
import pytest

from omdc import grassmann
from omdc.exceptions import StalledError, TangencyError


def random_point(rng, n, r):
    return np.linalg.qr(rng.standard_normal((n, r)))[0]


def random_tangent(rng, l):
    return grassmann.tangent_project(l, rng.standard_normal(l.shape))


def test_geodesic_at_zero_is_base(rng):
    l = random_point(rng, 8, 3)
    h = random_tangent(rng, l)
    assert np.allclose(grassmann.geodesic(l, h, 0.0), l, atol=1e-14)


def test_zero_direction_goes_nowhere(rng):
    l = random_point(rng, 6, 2)
    assert np.allclose(grassmann.geodesic(l, np.zeros_like(l), 3.7), l, atol=1e-14)


def test_great_circle_closed_form():
    # one-dimensional subspace of R^4 rotating toward a fixed orthogonal axis
    e1 = np.array([[1.0], [0.0], [0.0], [0.0]])
    e2 = np.array([[0.0], [1.0], [0.0], [0.0]])
    sigma = 0.75
    h = sigma * e2
    for t in (0.1, 0.9, 2.0, np.pi / sigma):
        point = grassmann.geodesic(e1, h, t)
        expected = e1 * np.cos(sigma * t) + e2 * np.sin(sigma * t)
        assert np.allclose(point, expected, atol=1e-13)
    # full revolution returns to the start
    assert np.allclose(grassmann.geodesic(e1, h, 2 * np.pi / sigma), e1, atol=1e-12)


def test_geodesic_stays_orthonormal(rng):
    l = random_point(rng, 20, 4)
    h = random_tangent(rng, l)
    for t in (0.01, 0.5, 2.0):
        point = grassmann.geodesic(l, h, t)
        assert np.linalg.norm(point.T @ point - np.eye(4)) <= 1e-12


def test_tangent_projection_is_idempotent_and_horizontal(rng):
    l = random_point(rng, 10, 3)
    d = rng.standard_normal((10, 3))
    g = grassmann.tangent_project(l, d)
    assert np.allclose(grassmann.tangent_project(l, g), g, atol=1e-13)
    assert np.linalg.norm(l.T @ g) <= 1e-12 * np.linalg.norm(g)


def test_vertical_direction_is_rejected(rng):
    l = random_point(rng, 6, 2)
    with pytest.raises(TangencyError):
        grassmann.TangentDirection(l, l.copy())


def test_transport_closed_form_single_column():
    e1 = np.array([[1.0], [0.0], [0.0]])
    e2 = np.array([[0.0], [1.0], [0.0]])
    sigma = 1.25
    t = 0.6
    tau_h, _ = grassmann.transport(e1, sigma * e2, sigma * e2, t)
    expected = sigma * (-e1 * np.sin(sigma * t) + e2 * np.cos(sigma * t))
    assert np.allclose(tau_h, expected, atol=1e-13)


def test_transport_preserves_norm_and_tangency(rng):
    l = random_point(rng, 15, 4)
    h = random_tangent(rng, l)
    g = random_tangent(rng, l)
    t = 0.8 / np.linalg.svd(h, compute_uv=False)[0]
    tau_h, tau_g = grassmann.transport(l, h, g, t)
    point = grassmann.geodesic(l, h, t)
    assert abs(np.linalg.norm(tau_h) - np.linalg.norm(h)) <= 1e-9 * np.linalg.norm(h)
    assert abs(np.linalg.norm(tau_g) - np.linalg.norm(g)) <= 1e-9 * np.linalg.norm(g)
    assert np.linalg.norm(point.T @ tau_h) <= 1e-8 * np.linalg.norm(h)
    assert np.linalg.norm(point.T @ tau_g) <= 1e-8 * np.linalg.norm(g)


def test_transport_of_direction_matches_geodesic_velocity(rng):
    l = random_point(rng, 9, 2)
    h = random_tangent(rng, l)
    t, eps = 0.4, 1e-6
    tau_h, _ = grassmann.transport(l, h, h, t)
    velocity = (grassmann.geodesic(l, h, t + eps) - grassmann.geodesic(l, h, t - eps)) / (
        2 * eps
    )
    assert np.allclose(tau_h, velocity, atol=1e-6 * max(1.0, np.linalg.norm(h)))


def test_polak_ribiere_degenerates_cleanly(rng):
    l = random_point(rng, 7, 2)
    g = random_tangent(rng, l)
    assert grassmann.polak_ribiere(g, np.zeros_like(g)) == pytest.approx(1.0)
    assert grassmann.polak_ribiere(g, g) == pytest.approx(0.0, abs=1e-15)
    assert grassmann.polak_ribiere(np.zeros_like(g), g) == 0.0


def quadratic_instance(rng, n, r):
    d = np.sort(rng.uniform(0.5, 10.0, n))[::-1]
    k = np.diag(d)
    cost = lambda l: -float(np.sum((k @ l) * l))
    grad = lambda l: -2.0 * k @ l
    return d, cost, grad


def test_line_search_achieves_descent(rng):
    d, cost, grad = quadratic_instance(rng, 8, 2)
    l = random_point(rng, 8, 2)
    g = grassmann.tangent_project(l, grad(l))
    t = grassmann.line_search(cost, l, -g, grad=grad(l))
    assert t > 0
    assert cost(grassmann.geodesic(l, -g, t)) < cost(l)


def test_line_search_requires_slope_information(rng):
    _, cost, _ = quadratic_instance(rng, 6, 2)
    l = random_point(rng, 6, 2)
    with pytest.raises(ValueError):
        grassmann.line_search(cost, l, random_tangent(rng, l))


def test_cg_finds_dominant_eigenspace(rng):
    # minimizing -tr(L^T K L) over 2-dim subspaces picks the top two
    # eigendirections; optimum value is minus the sum of the two
    # largest eigenvalues
    d, cost, grad = quadratic_instance(rng, 6, 2)
    l0 = random_point(rng, 6, 2)
    opts = grassmann.CgOptions(grad_tol=1e-6, rel_cost_tol=0.0)
    l_star, report = grassmann.cg_minimize(cost, grad, l0, opts)
    assert report.termination == "gradient"
    assert report.final_cost == pytest.approx(-(d[0] + d[1]), abs=1e-8)
    top = np.zeros((6, 2))
    top[0, 0] = top[1, 1] = 1.0
    assert np.linalg.norm(l_star - top @ (top.T @ l_star)) <= 1e-4
    assert np.linalg.norm(l_star.T @ l_star - np.eye(2)) <= 1e-10


def test_cg_history_is_monotone(rng):
    _, cost, grad = quadratic_instance(rng, 12, 3)
    _, report = grassmann.cg_minimize(cost, grad, random_point(rng, 12, 3))
    hist = np.asarray(report.cost_history)
    assert np.all(np.diff(hist) <= 1e-12 * np.maximum(np.abs(hist[:-1]), 1.0))
    assert report.n_cost_evals >= report.iterations
    assert report.wall_time_s > 0


def test_cg_terminates_immediately_at_optimum(rng):
    d, cost, grad = quadratic_instance(rng, 5, 2)
    top = np.zeros((5, 2))
    top[0, 0] = top[1, 1] = 1.0
    _, report = grassmann.cg_minimize(cost, grad, top)
    assert report.termination == "gradient"
    assert report.iterations == 0


def test_cg_raises_stalled_on_inconsistent_gradient(rng):
    # a gradient with the wrong sign turns every proposed direction into
    # ascent; the solver must fall back to steepest descent, fail there
    # too, and surface the diagnosis with its report
    d, cost, grad = quadratic_instance(rng, 6, 2)
    lying_grad = lambda l: -grad(l)
    l0 = random_point(rng, 6, 2)
    with pytest.raises(StalledError) as exc_info:
        grassmann.cg_minimize(cost, lying_grad, l0)
    assert exc_info.value.report.termination == "stalled"


def test_cg_plateau_termination(rng):
    _, cost, grad = quadratic_instance(rng, 10, 2)
    opts = grassmann.CgOptions(grad_tol=1e-300, rel_cost_tol=1e-4)
    _, report = grassmann.cg_minimize(cost, grad, random_point(rng, 10, 2), opts)
    assert report.termination == "cost_plateau"


def test_cg_respects_iteration_budget(rng):
    _, cost, grad = quadratic_instance(rng, 10, 2)
    opts = grassmann.CgOptions(max_iters=3, grad_tol=1e-300, rel_cost_tol=0.0)
    _, report = grassmann.cg_minimize(cost, grad, random_point(rng, 10, 2), opts)
    assert report.termination == "max_iters"
    assert report.iterations == 3


@pytest.mark.parametrize(
    "field,value",
    [
        ("max_iters", 0),
        ("grad_tol", 0.0),
        ("rel_cost_tol", -1e-3),
        ("restart_period", -1),
        ("initial_step", -0.1),
        ("contraction", 1.0),
        ("armijo_c", 0.0),
        ("max_backtracks", 0),
    ],
)
def test_options_validation(field, value):
    with pytest.raises(ValueError):
        grassmann.CgOptions(**{field: value})
