"""Shared fixtures.

The drying run and the rank-10 models are expensive relative to
everything else, so they are computed once per session and shared by
the simulator, model, and acceptance tests.
"""
import numpy as np
import pytest

from omdc import dmdc, dryer, objective, store


@pytest.fixture(scope="session")
def drying_run():
    """Full default drying simulation with its conservation audit."""
    return dryer.simulate_with_audit(dryer.default_config())


@pytest.fixture(scope="session")
def drying_snapshots(drying_run):
    snap, _ = drying_run
    return snap


@pytest.fixture(scope="session")
def drying_normalized(drying_snapshots):
    return store.normalize_fields(drying_snapshots)


@pytest.fixture(scope="session")
def omdc_drying(drying_normalized):
    """Rank-10 model of the drying data plus its solver report."""
    return objective.omdc_identify(drying_normalized, 10)


@pytest.fixture(scope="session")
def dmdc_drying(drying_normalized):
    """Rank-10 projected least-squares competitor on the same data."""
    norm = drying_normalized
    x, y = store.split_snapshots(norm.s)
    reduced = dmdc.dmdc_reduced(x, y, norm.u, 10)
    model = dmdc.as_rom(reduced, norm.dt_sample, norm.norm_spec, norm.field_layout)
    return model, reduced


def random_linear_system(rng, n, p, m, spectral_radius=0.9):
    """Exact data from a random stable x_{k+1} = A x_k + B u_k."""
    a = rng.standard_normal((n, n))
    a *= spectral_radius / max(np.abs(np.linalg.eigvals(a)))
    b = rng.standard_normal((n, p))
    u = rng.standard_normal((p, m - 1))
    s = np.empty((n, m))
    s[:, 0] = rng.standard_normal(n)
    for k in range(m - 1):
        s[:, k + 1] = a @ s[:, k] + b @ u[:, k]
    return a, b, s, u


@pytest.fixture
def rng():
    return np.random.default_rng(0x5EED)
