"""Subspace identification by residual minimization over mode spans.

The model class is x_{k+1} ~= L M L^T x_k + L P u_k with L an
orthonormal n x r basis. For a fixed span the optimal input map P and
reduced dynamics M have closed forms; substituting them leaves a cost
that depends on span(L) alone and is minimized by conjugate gradient on
the subspace manifold (:mod:`.grassmann`).

All cost and gradient evaluations run on cached Gram matrices whose
size is the snapshot count, not the state dimension. When states
outnumber snapshots the problem is first compressed exactly through a
thin QR of the snapshot matrix, and the optimal basis is lifted back
at the end.
"""

from dataclasses import dataclass

import numpy as np

from . import grassmann
from .exceptions import (
    DimensionMismatchError,
    InputRankError,
    ProjectedRankError,
    RankError,
    StalledError,
)
from .linalg import thin_qr, thin_svd
from .rom import RomModel
from .store import split_snapshots
from .validation import as_matrix

COND_LIMIT = 1e12
RIDGE_SCALE = 1e-12


@dataclass(frozen=True)
class OmdcData:
    """Cached Gram products for one identification problem.

    With the input-deflated data Xh = X Q, Yh = Y Q where
    Q = I - U^T (U U^T)^{-1} U, the cached blocks are:

    cross_gram     Yh Xh^T
    state_gram     Xh Xh^T
    explained_gram Y U^T (U U^T)^{-1} U Y^T
    y_u_proj       Y U^T (U U^T)^{-1}
    x_u_proj       X U^T (U U^T)^{-1}
    norm_y_sq      ||Y||_F^2
    """

    cross_gram: np.ndarray
    state_gram: np.ndarray
    explained_gram: np.ndarray
    y_u_proj: np.ndarray
    x_u_proj: np.ndarray
    norm_y_sq: float

    @property
    def n_rows(self):
        return self.state_gram.shape[0]

    @property
    def n_inputs(self):
        return self.y_u_proj.shape[1]


def build_data(x, y, u, cond_limit=COND_LIMIT):
    """Assemble the cached products; fails fast on rank-deficient inputs.

    The input Gram U U^T must be invertible: its condition number is
    checked against ``cond_limit`` before anything else is computed.
    """
    x = as_matrix(x, "x")
    y = as_matrix(y, "y")
    u = as_matrix(u, "u")
    if x.shape != y.shape:
        raise DimensionMismatchError(f"x and y must match, got {x.shape} vs {y.shape}")
    if u.shape[1] != x.shape[1]:
        raise DimensionMismatchError(
            f"u must have {x.shape[1]} columns, got {u.shape[1]}"
        )
    if u.shape[0] < 1:
        raise DimensionMismatchError("need at least one input row")
    uu = u @ u.T
    uu = (uu + uu.T) / 2.0
    evs = np.linalg.eigvalsh(uu)
    if evs[0] <= 0 or evs[-1] >= cond_limit * evs[0]:
        cond = float("inf") if evs[0] <= 0 else float(evs[-1] / evs[0])
        raise InputRankError(
            f"input Gram U U^T is numerically singular (condition {cond:.3e})"
        )
    y_u = y @ u.T
    x_u = x @ u.T
    y_u_proj = np.linalg.solve(uu, y_u.T).T
    x_u_proj = np.linalg.solve(uu, x_u.T).T
    yhat = y - y_u_proj @ u
    xhat = x - x_u_proj @ u
    explained = y_u_proj @ y_u.T
    state_gram = xhat @ xhat.T
    return OmdcData(
        cross_gram=yhat @ xhat.T,
        state_gram=(state_gram + state_gram.T) / 2.0,
        explained_gram=(explained + explained.T) / 2.0,
        y_u_proj=y_u_proj,
        x_u_proj=x_u_proj,
        norm_y_sq=float(np.sum(y * y)),
    )


def _projected_grams(l, data):
    b = l.T @ (data.state_gram @ l)
    a = l.T @ (data.cross_gram @ l)
    return a, (b + b.T) / 2.0


def _solve_projected(a, b, ridge, events):
    """M = A B^{-1} with an optional diagonal ridge on ill-conditioned B."""
    evs = np.linalg.eigvalsh(b)
    if evs[0] <= 0 or evs[-1] >= COND_LIMIT * evs[0]:
        cond = float("inf") if evs[0] <= 0 else float(evs[-1] / evs[0])
        if not ridge:
            raise ProjectedRankError(
                f"projected Gram L^T Xh Xh^T L is numerically singular "
                f"(condition {cond:.3e})"
            )
        lam = RIDGE_SCALE * float(np.trace(b)) / b.shape[0]
        if lam <= 0:
            raise ProjectedRankError("projected Gram has nonpositive trace")
        b = b + lam * np.eye(b.shape[0])
        if events is not None:
            events.append(f"ridge {lam:.3e} applied at condition {cond:.3e}")
    try:
        return np.linalg.solve(b, a.T).T
    except np.linalg.LinAlgError as exc:
        raise ProjectedRankError(f"projected Gram solve failed: {exc}") from exc


def optimal_dynamics(l, data, *, ridge=False, events=None):
    """Best reduced dynamics M for the span of l (closed form)."""
    a, b = _projected_grams(l, data)
    return _solve_projected(a, b, ridge, events)


def optimal_input_map(l, m, data):
    """Best reduced input map P for the span of l and dynamics m."""
    return l.T @ data.y_u_proj - m @ (l.T @ data.x_u_proj)


def evaluate_cost(l, data, *, ridge=False, events=None):
    """Residual cost of the span of l with M and P eliminated.

    Equals ||Y - L M* L^T X - L P* U||_F^2 whenever l is orthonormal.
    """
    a, b = _projected_grams(l, data)
    m = _solve_projected(a, b, ridge, events)
    explained = float(np.sum((data.explained_gram @ l) * l))
    fitted = float(np.sum(m * a))
    return data.norm_y_sq - explained - fitted


def evaluate_gradient(l, data, *, ridge=False, events=None):
    """Derivative of :func:`evaluate_cost` with respect to the basis entries.

    Consistent with central finite differences of the cost as a plain
    function of the matrix entries; project it to the horizontal space
    to get the manifold gradient.
    """
    a, b = _projected_grams(l, data)
    m = _solve_projected(a, b, ridge, events)
    k_l = data.explained_gram @ l
    yx_l = data.cross_gram @ l
    xy_l = data.cross_gram.T @ l
    xx_l = data.state_gram @ l
    return -2.0 * (k_l + yx_l @ m.T + xy_l @ m - xx_l @ (m.T @ m))


# ---------------------------------------------------------------------------
# exact compression for tall snapshot matrices


@dataclass(frozen=True)
class ReducedProblem:
    """Snapshots compressed through S = Q R without changing the cost.

    q_factor is n x m orthonormal; r_factor is the m x m triangular
    image of the snapshots. The shifted pair of r_factor poses the same
    minimization with row dimension m, and any basis found there lifts
    back as q_factor @ l.
    """

    q_factor: np.ndarray
    r_factor: np.ndarray

    @property
    def x(self):
        return self.r_factor[:, :-1]

    @property
    def y(self):
        return self.r_factor[:, 1:]


def reduce_problem(s):
    """Compress snapshots with more rows than columns via thin QR."""
    s = as_matrix(s, "s")
    n, m = s.shape
    if n < m:
        raise DimensionMismatchError(
            f"compression needs rows >= columns, got {n} x {m}"
        )
    f = thin_qr(s)
    return ReducedProblem(q_factor=f.q, r_factor=f.r)


# ---------------------------------------------------------------------------
# identification driver


def _run_cg(cost, grad, l0, opts):
    # On noiseless data the residual reaches the rounding floor of the
    # Gram-based cost, where descent can no longer be certified and the
    # optimizer stalls; for identification that is a termination, not a
    # failure, so keep the stalled iterate.
    try:
        return grassmann.cg_minimize(cost, grad, l0, opts)
    except StalledError as exc:
        if exc.point is None or exc.report is None:
            raise
        return exc.point, exc.report


def omdc_identify(snap, r, opts=None, *, initial_modes=None, use_reduction=None):
    """Identify a rank-r model by minimizing the eliminated residual.

    Parameters
    ----------
    snap : SnapshotSet
        Training data; the model keeps its norm_spec and field layout.
    r : int
        Model order; must satisfy 1 <= r < numerical rank of the
        snapshots.
    opts : grassmann.CgOptions, optional
    initial_modes : (n, r) array, optional
        Starting basis. Defaults to the leading left singular vectors
        of the snapshot matrix. Must lie in the snapshot column span
        when compression is active.
    use_reduction : bool, optional
        Force the QR compression on or off; default compresses exactly
        when states outnumber snapshots.

    Returns
    -------
    (RomModel, grassmann.CgReport)

    The optimizer also evaluates the cost at the leading output
    subspace (the left singular vectors of Y); if that span beats the
    converged one, the search is rerun from it and the better result
    is returned.
    """
    s, u = snap.s, snap.u
    split_snapshots(s)  # validates column count early
    n, m = s.shape
    if use_reduction is None:
        use_reduction = n >= m

    events = []
    if use_reduction:
        rp = reduce_problem(s)
        work_s = rp.r_factor
        work_x, work_y = rp.x, rp.y
        lift = rp.q_factor
    else:
        work_s = s
        work_x, work_y = split_snapshots(s)
        lift = None

    data = build_data(work_x, work_y, u)
    fs = thin_svd(work_s)
    if not 1 <= r < fs.rank:
        raise RankError(
            f"model order must satisfy 1 <= r < rank(S) = {fs.rank}, got {r}"
        )

    if initial_modes is not None:
        l0 = as_matrix(initial_modes, "initial_modes")
        if l0.shape != (n, r):
            raise DimensionMismatchError(
                f"initial_modes must be {n} x {r}, got {l0.shape}"
            )
        if lift is not None:
            l0 = lift.T @ l0
        f0 = thin_qr(l0)
        if np.abs(np.diag(f0.r)).min() < 1e-8:
            raise RankError("initial_modes are numerically rank deficient")
        l0 = f0.q
    else:
        l0 = fs.u[:, :r]

    cost = lambda l: evaluate_cost(l, data, ridge=True, events=events)
    grad = lambda l: evaluate_gradient(l, data, ridge=True, events=events)

    opts = opts or grassmann.CgOptions()
    l_star, report = _run_cg(cost, grad, l0, opts)

    # The leading output subspace is the natural competitor; keep
    # whichever span ends lower.
    l_pod = thin_svd(work_y).u[:, :r]
    f_pod = evaluate_cost(l_pod, data, ridge=True, events=events)
    restarted = False
    if f_pod < report.final_cost:
        l_alt, rep_alt = _run_cg(cost, grad, l_pod, opts)
        if rep_alt.final_cost < report.final_cost:
            l_star, report = l_alt, rep_alt
            restarted = True

    m_mat = optimal_dynamics(l_star, data)
    p_mat = optimal_input_map(l_star, m_mat, data)
    modes = lift @ l_star if lift is not None else l_star

    info = report.to_dict()
    info.update(
        {
            "method": "omdc",
            "reduced": bool(use_reduction),
            "ridge_events": len(events),
            "restarted_from_output_subspace": restarted,
        }
    )
    model = RomModel(
        modes=modes,
        dynamics=m_mat,
        input_map=p_mat,
        method="omdc",
        dt_sample=snap.dt_sample,
        norm_spec=snap.norm_spec,
        field_layout=snap.field_layout,
        solver_info=info,
    )
    return model, report
