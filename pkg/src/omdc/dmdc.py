"""Dynamic mode decomposition with control inputs.

Given the shifted snapshot pair (X, Y) and inputs U, the full-order
identification solves Y ~= A X + B U in the least-squares sense through
one thin SVD of the stacked regressor [X; U]. The reduced form projects
the same solution onto the leading left singular vectors of Y.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatchError, RankError
from .linalg import thin_svd
from .rom import RomModel
from .store import stack_omega
from .validation import as_matrix


@dataclass(frozen=True)
class DmdcFull:
    """Full-order least-squares operators in factored form.

    A = w_factor @ phi_x.T is n x n and never materialized unless asked
    for; B = w_factor @ phi_u.T is n x p. phi_x / phi_u are the state
    and input blocks of the regressor's left singular vectors.
    """

    w_factor: np.ndarray
    phi_x: np.ndarray
    phi_u: np.ndarray

    @property
    def n_states(self):
        return self.w_factor.shape[0]

    @property
    def n_inputs(self):
        return self.phi_u.shape[0]

    def apply_dynamics(self, x):
        """Compute A @ x without forming A."""
        return self.w_factor @ (self.phi_x.T @ x)

    def dynamics_matrix(self):
        """Materialize A (n x n); intended for small n."""
        return self.w_factor @ self.phi_x.T

    def input_matrix(self):
        """Materialize B (n x p)."""
        return self.w_factor @ self.phi_u.T


@dataclass(frozen=True)
class DmdcReduced:
    """Rank-r projected operators plus the projection basis."""

    modes: np.ndarray
    dynamics: np.ndarray
    input_map: np.ndarray

    @property
    def order(self):
        return self.modes.shape[1]


def dmdc_full(x, y, u, rtol=None):
    """Identify the full-order pair (A, B) from one regressor SVD.

    Rank deficiency in [X; U] is resolved by the minimum-norm solution.
    """
    x = as_matrix(x, "x")
    y = as_matrix(y, "y")
    u = as_matrix(u, "u")
    if y.shape != x.shape:
        raise DimensionMismatchError(f"x and y must match, got {x.shape} vs {y.shape}")
    omega = stack_omega(x, u)
    f = thin_svd(omega, rtol=rtol)
    n = x.shape[0]
    w = (y @ f.v) / f.sigma if f.rank else np.zeros((n, 0))
    return DmdcFull(w_factor=w, phi_x=f.u[:n], phi_u=f.u[n:])


def dmdc_reduced(x, y, u, r, rtol=None):
    """Project the full-order solution onto the leading r modes of Y.

    The modes are the first r left singular vectors of Y; the reduced
    operators reproduce modes.T @ (A, B) @ modes exactly without ever
    forming A.
    """
    x = as_matrix(x, "x")
    y = as_matrix(y, "y")
    u = as_matrix(u, "u")
    if y.shape != x.shape:
        raise DimensionMismatchError(f"x and y must match, got {x.shape} vs {y.shape}")
    if r < 1:
        raise RankError(f"rank must be >= 1, got {r}")
    fy = thin_svd(y, rtol=rtol)
    if r > fy.rank:
        raise RankError(f"requested rank {r} exceeds rank(Y) = {fy.rank}")
    modes = fy.u[:, :r]
    omega = stack_omega(x, u)
    f = thin_svd(omega, rtol=rtol)
    n = x.shape[0]
    # modes.T @ Y = diag(sigma_r) @ V_r.T exactly, so the projected
    # solution needs only small products.
    c = (fy.sigma[:r, None] * (fy.v[:, :r].T @ f.v)) / f.sigma
    a_hat = c @ (f.u[:n].T @ modes)
    b_hat = c @ f.u[n:].T
    return DmdcReduced(modes=modes, dynamics=a_hat, input_map=b_hat)


def as_rom(reduced, dt_sample, norm_spec=None, field_layout=None, solver_info=None):
    """Wrap a DmdcReduced result as a RomModel."""
    return RomModel(
        modes=reduced.modes,
        dynamics=reduced.dynamics,
        input_map=reduced.input_map,
        method="dmdc",
        dt_sample=dt_sample,
        norm_spec=norm_spec,
        field_layout=field_layout,
        solver_info=solver_info,
    )
