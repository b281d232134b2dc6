"""Estimator-style front ends for the two identification methods.

Both estimators consume snapshot matrices in the column convention
used throughout this package: states are columns, so S is (n, m) and
U is (p, m - 1). fit learns a rank-r model, after which predict rolls
the reduced dynamics forward from a full initial state and transform
projects states onto the identified modes.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import dmdc as _dmdc
from . import objective, rom
from .grassmann import CgOptions
from .store import FieldSpan, SnapshotSet, split_snapshots
from .validation import as_matrix


class _RomEstimator(BaseEstimator):
    """Shared plumbing: both estimators expose a fitted RomModel."""

    def _make_snapshots(self, s, u):
        s = as_matrix(s, "S")
        u = as_matrix(u, "U")
        layout = (FieldSpan("state", 0, s.shape[0]),)
        return SnapshotSet(
            s=s, u=u, dt_sample=self.dt_sample, field_layout=layout
        )

    def transform(self, s):
        """Reduced coordinates of full states (columns)."""
        check_is_fitted(self, "model_")
        s = as_matrix(s, "S")
        return self.modes_.T @ s

    def inverse_transform(self, coeffs):
        """Full states reconstructed from reduced coordinates."""
        check_is_fitted(self, "model_")
        return self.modes_ @ np.asarray(coeffs, dtype=np.float64)

    def predict(self, x0, u_seq):
        """Full-state trajectory (n, K + 1) from x0 under the inputs."""
        check_is_fitted(self, "model_")
        traj = rom.simulate(self.model_, x0, u_seq)
        return rom.lift(self.model_, traj.coeffs)

    def score(self, s, u):
        """Negative mean squared one-step residual (higher is better)."""
        check_is_fitted(self, "model_")
        s = as_matrix(s, "S")
        u = as_matrix(u, "U")
        x, y = split_snapshots(s)
        cost = rom.one_step_cost(
            self.modes_, self.dynamics_, self.input_map_, x, y, u
        )
        return -cost / y.size

    def spectrum(self):
        """Eigenvalues of the reduced dynamics, deterministically ordered."""
        check_is_fitted(self, "model_")
        return rom.eigenvalues(self.dynamics_).values

    def _finish_fit(self, model):
        self.model_ = model
        self.modes_ = model.modes
        self.dynamics_ = model.dynamics
        self.input_map_ = model.input_map
        self.n_features_in_ = model.n_states
        return self


class DMDc(_RomEstimator):
    """Rank-r dynamic mode decomposition with control.

    One SVD of the stacked regressor [X; U] and one of Y; the reduced
    operators are the full least-squares solution projected onto the
    leading output modes.

    Parameters
    ----------
    rank : int
        Model order r.
    dt_sample : float
        Sampling interval attached to the fitted model.
    rtol : float or None
        Rank tolerance forwarded to the SVDs.
    """

    def __init__(self, rank=2, dt_sample=1.0, rtol=None):
        self.rank = rank
        self.dt_sample = dt_sample
        self.rtol = rtol

    def fit(self, s, u):
        snap = self._make_snapshots(s, u)
        x, y = split_snapshots(snap.s)
        reduced = _dmdc.dmdc_reduced(x, y, snap.u, self.rank, rtol=self.rtol)
        model = _dmdc.as_rom(
            reduced,
            dt_sample=self.dt_sample,
            field_layout=snap.field_layout,
            solver_info={"method": "dmdc"},
        )
        return self._finish_fit(model)


class OMDc(_RomEstimator):
    """Rank-r identification by residual minimization over mode spans.

    Finds the orthonormal basis whose best reduced model has the
    smallest one-step residual, by conjugate gradient on the subspace
    manifold. Strictly at least as good a fit as DMDc at equal rank.

    Parameters
    ----------
    rank : int
        Model order r.
    dt_sample : float
        Sampling interval attached to the fitted model.
    max_iters, grad_tol, rel_cost_tol, restart_period, initial_step,
    contraction, armijo_c, max_backtracks :
        Optimizer knobs; see :class:`omdc.grassmann.CgOptions`.
    use_reduction : bool or None
        Force the exact QR compression on or off (None = automatic).

    Attributes
    ----------
    model_ : RomModel
    report_ : grassmann.CgReport
        Iterations, termination reason and cost history of the search.
    """

    def __init__(
        self,
        rank=2,
        dt_sample=1.0,
        max_iters=2000,
        grad_tol=1e-8,
        rel_cost_tol=1e-6,
        restart_period=0,
        initial_step=0.0,
        contraction=0.5,
        armijo_c=1e-4,
        max_backtracks=40,
        use_reduction=None,
    ):
        self.rank = rank
        self.dt_sample = dt_sample
        self.max_iters = max_iters
        self.grad_tol = grad_tol
        self.rel_cost_tol = rel_cost_tol
        self.restart_period = restart_period
        self.initial_step = initial_step
        self.contraction = contraction
        self.armijo_c = armijo_c
        self.max_backtracks = max_backtracks
        self.use_reduction = use_reduction

    def _options(self):
        return CgOptions(
            max_iters=self.max_iters,
            grad_tol=self.grad_tol,
            rel_cost_tol=self.rel_cost_tol,
            restart_period=self.restart_period,
            initial_step=self.initial_step,
            contraction=self.contraction,
            armijo_c=self.armijo_c,
            max_backtracks=self.max_backtracks,
        )

    def fit(self, s, u):
        snap = self._make_snapshots(s, u)
        model, report = objective.omdc_identify(
            snap, self.rank, self._options(), use_reduction=self.use_reduction
        )
        self.report_ = report
        self.cost_ = report.final_cost
        return self._finish_fit(model)
