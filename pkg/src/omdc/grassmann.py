"""Conjugate-gradient minimization over orthonormal subspace bases.

A point is an n x r matrix L with orthonormal columns standing in for
its column span; costs must depend on span(L) only. Search directions
are horizontal (L^T H = 0). Points move along geodesics computed from
the direction's thin SVD, and previous gradients and directions are
parallel-transported so the nonlinear conjugate-gradient update always
combines tangent vectors at the same base point.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DimensionMismatchError,
    LineSearchError,
    StalledError,
    TangencyError,
)
from .validation import as_matrix, check_orthonormal

PLATEAU_WINDOW = 5
REORTH_EVERY = 50
_TINY = 1e-300


class TangentDirection:
    """Horizontal direction at a base point, with its thin SVD cached.

    The SVD drives every geodesic and transport formula, so it is
    computed once at construction. Zero singular values are kept; the
    formulas below are exact for them.
    """

    def __init__(self, base, h, check=True):
        base = np.asarray(base, dtype=np.float64)
        h = np.asarray(h, dtype=np.float64)
        if h.shape != base.shape:
            raise DimensionMismatchError(
                f"direction shape {h.shape} does not match base {base.shape}"
            )
        if check:
            hnorm = np.linalg.norm(h)
            drift = np.linalg.norm(base.T @ h)
            if drift > 1e-8 * max(1.0, hnorm):
                raise TangencyError(
                    f"direction is not horizontal: ||L^T H|| = {drift:.3e}"
                )
        self.base = base
        self.h = h
        u, s, vt = np.linalg.svd(h, full_matrices=False)
        self.u = u
        self.sigma = s
        self.vt = vt
        self._base_v = base @ vt.T

    @property
    def max_sigma(self):
        return float(self.sigma[0]) if self.sigma.size else 0.0

    def point_at(self, t):
        """Geodesic point L(t) leaving the base along this direction."""
        c = np.cos(t * self.sigma)
        s = np.sin(t * self.sigma)
        return (self._base_v * c + self.u * s) @ self.vt

    def transport(self, g, t):
        """Parallel-transport this direction and a tangent g to L(t)."""
        c = np.cos(t * self.sigma)
        s = np.sin(t * self.sigma)
        tau_h = ((-self._base_v * s + self.u * c) * self.sigma) @ self.vt
        w = self.u.T @ g
        tau_g = g - (self._base_v * s + self.u * (1.0 - c)) @ w
        return tau_h, tau_g


def geodesic(l, h, t):
    """Point reached after moving for parameter t along direction h."""
    return TangentDirection(l, h).point_at(t)


def transport(l, h, g, t):
    """Carry (h, g) from the tangent space at l to the one at geodesic(l, h, t)."""
    return TangentDirection(l, h).transport(g, t)


def tangent_project(l, d):
    """Horizontal component of an ambient derivative: d - L (L^T d)."""
    return d - l @ (l.T @ d)


def polak_ribiere(g_new, tau_g_prev):
    """Conjugacy coefficient from the transported previous gradient.

    Normalized by the new gradient's squared norm; returns 0 when that
    norm underflows, which degrades the step to steepest descent.
    """
    denom = float(np.sum(g_new * g_new))
    if denom < _TINY:
        return 0.0
    return float(np.sum((g_new - tau_g_prev) * g_new)) / denom


@dataclass(frozen=True)
class CgOptions:
    """Optimizer knobs; defaults suit the identification problems here.

    restart_period = 0 means the dimension-based default r * (n - r);
    initial_step = 0 means 1 / sigma_max of the first direction.
    """

    max_iters: int = 2000
    grad_tol: float = 1e-8
    rel_cost_tol: float = 1e-6
    restart_period: int = 0
    initial_step: float = 0.0
    contraction: float = 0.5
    armijo_c: float = 1e-4
    max_backtracks: int = 40

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if self.rel_cost_tol < 0:
            raise ValueError("rel_cost_tol must be >= 0")
        if self.restart_period < 0:
            raise ValueError("restart_period must be >= 0")
        if self.initial_step < 0:
            raise ValueError("initial_step must be >= 0")
        if not 0 < self.contraction < 1:
            raise ValueError("contraction must lie in (0, 1)")
        if not 0 < self.armijo_c < 1:
            raise ValueError("armijo_c must lie in (0, 1)")
        if self.max_backtracks < 1:
            raise ValueError("max_backtracks must be >= 1")


@dataclass
class CgReport:
    """What the optimizer did and why it stopped."""

    iterations: int
    final_cost: float
    final_grad_norm: float
    termination: str
    cost_history: list = field(repr=False)
    n_cost_evals: int = 0
    n_grad_evals: int = 0
    n_restarts: int = 0
    wall_time_s: float = 0.0

    def to_dict(self):
        return {
            "iterations": self.iterations,
            "final_cost": self.final_cost,
            "final_grad_norm": self.final_grad_norm,
            "termination": self.termination,
            "n_cost_evals": self.n_cost_evals,
            "n_grad_evals": self.n_grad_evals,
            "n_restarts": self.n_restarts,
            "wall_time_s": self.wall_time_s,
            "cost_history": [float(v) for v in self.cost_history],
        }


def _backtrack(cost_fn, direction, f0, slope, t_init, opts):
    """Armijo backtracking along a geodesic; returns (t, f_t, point_t)."""
    if not slope < 0:
        raise LineSearchError(f"not a descent direction: slope = {slope:.3e}")
    if not t_init > 0:
        raise LineSearchError(f"initial trial step must be positive, got {t_init}")
    t = t_init
    evals = 0
    for _ in range(opts.max_backtracks + 1):
        point = direction.point_at(t)
        f_t = cost_fn(point)
        evals += 1
        if f_t <= f0 + opts.armijo_c * t * slope:
            return t, f_t, point, evals
        t *= opts.contraction
    raise LineSearchError(
        f"no acceptable step after {opts.max_backtracks} contractions "
        f"from t = {t_init:.3e}"
    )


def line_search(cost_fn, l, h, opts=None, *, grad=None, slope=None, f0=None, t_init=None):
    """Backtracking step length along the geodesic leaving l in direction h.

    One of grad or slope must be given so the sufficient-decrease test
    has the directional derivative tr(G^T H), which must be negative.
    """
    opts = opts or CgOptions()
    direction = h if isinstance(h, TangentDirection) else TangentDirection(l, h)
    if slope is None:
        if grad is None:
            raise ValueError("line_search needs grad or slope")
        slope = float(np.sum(np.asarray(grad) * direction.h))
    if f0 is None:
        f0 = float(cost_fn(l))
    if t_init is None:
        t_init = opts.initial_step
        if t_init == 0.0:
            if direction.max_sigma == 0.0:
                raise LineSearchError("zero direction")
            t_init = 1.0 / direction.max_sigma
    t, _, _, _ = _backtrack(cost_fn, direction, f0, slope, t_init, opts)
    return t


def _reorthonormalize(l):
    # keep Q aligned with l (diag(R) > 0) so tangent data stays consistent
    q, r = np.linalg.qr(l)
    sgn = np.sign(np.diag(r))
    sgn[sgn == 0] = 1.0
    return q * sgn


def cg_minimize(cost_fn, grad_fn, l0, opts=None):
    """Minimize a span-invariant cost by geodesic conjugate gradient.

    Parameters
    ----------
    cost_fn : callable mapping an orthonormal (n, r) basis to a float.
    grad_fn : callable returning the ambient derivative, same shape as l.
        It is projected to the horizontal space internally.
    l0 : orthonormal initial basis.
    opts : CgOptions, optional.

    Returns
    -------
    (l_star, CgReport)

    Stops when the projected gradient norm falls below
    grad_tol * max(1, initial gradient norm), when the cost has not
    decreased relatively by rel_cost_tol over the last 5 iterations,
    or at max_iters. Every accepted step decreases the cost, so the
    recorded cost history is nonincreasing.
    """
    t_start = time.perf_counter()
    opts = opts or CgOptions()
    l = as_matrix(l0, "l0").copy()
    n, r = l.shape
    if not 1 <= r <= n:
        raise DimensionMismatchError(f"need 1 <= r <= n, got r={r}, n={n}")
    check_orthonormal(l, tol=1e-8, name="l0")
    restart_period = opts.restart_period or max(1, r * (n - r))

    f = float(cost_fn(l))
    g = tangent_project(l, grad_fn(l))
    n_cost, n_grad, n_restart = 1, 1, 0
    gnorm = float(np.linalg.norm(g))
    gnorm_ref = max(1.0, gnorm)
    h = -g
    history = [f]
    prev_t = None
    iters = 0

    def make_report(reason):
        return CgReport(
            iterations=iters,
            final_cost=f,
            final_grad_norm=gnorm,
            termination=reason,
            cost_history=history,
            n_cost_evals=n_cost,
            n_grad_evals=n_grad,
            n_restarts=n_restart,
            wall_time_s=time.perf_counter() - t_start,
        )

    while True:
        if gnorm <= opts.grad_tol * gnorm_ref:
            return l, make_report("gradient")
        if len(history) > PLATEAU_WINDOW:
            f_then = history[-1 - PLATEAU_WINDOW]
            if f_then - f <= opts.rel_cost_tol * max(abs(f_then), _TINY):
                return l, make_report("cost_plateau")
        if iters >= opts.max_iters:
            return l, make_report("max_iters")

        slope = float(np.sum(g * h))
        steepest = False
        if not slope < 0:
            h = -g
            slope = -gnorm * gnorm
            steepest = True
            n_restart += 1
        direction = TangentDirection(l, tangent_project(l, h), check=False)
        if direction.max_sigma == 0.0:
            return l, make_report("gradient")
        if prev_t is None:
            t_init = opts.initial_step or 1.0 / direction.max_sigma
        else:
            # previous accepted step, probing one notch larger so the
            # trial scale can recover after a deep backtrack; geodesics
            # are periodic, so never probe past half a great circle
            t_init = min(prev_t / opts.contraction, np.pi / direction.max_sigma)

        try:
            t, f_new, l_new, ev = _backtrack(cost_fn, direction, f, slope, t_init, opts)
            n_cost += ev
        except LineSearchError as exc:
            n_cost += opts.max_backtracks + 1
            if steepest:
                raise StalledError(
                    f"line search failed along steepest descent: {exc}",
                    report=make_report("stalled"),
                    point=l,
                ) from exc
            h = -g
            slope = -gnorm * gnorm
            n_restart += 1
            direction = TangentDirection(l, h, check=False)
            t_init = opts.initial_step or 1.0 / direction.max_sigma
            try:
                t, f_new, l_new, ev = _backtrack(
                    cost_fn, direction, f, slope, t_init, opts
                )
                n_cost += ev
            except LineSearchError as exc2:
                raise StalledError(
                    f"line search failed along steepest descent: {exc2}",
                    report=make_report("stalled"),
                    point=l,
                ) from exc2

        iters += 1
        if iters % REORTH_EVERY == 0:
            l_new = _reorthonormalize(l_new)
        tau_h, tau_g = direction.transport(g, t)
        tau_h = tangent_project(l_new, tau_h)
        tau_g = tangent_project(l_new, tau_g)
        g_new = tangent_project(l_new, grad_fn(l_new))
        n_grad += 1
        gamma = polak_ribiere(g_new, tau_g)
        h = -g_new + gamma * tau_h
        if iters % restart_period == 0:
            h = -g_new
            n_restart += 1
        prev_t = t
        l, g, f = l_new, g_new, f_new
        gnorm = float(np.linalg.norm(g))
        history.append(f)
