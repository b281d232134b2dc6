"""Deterministic thin matrix factorizations and least squares.

Thin wrappers around LAPACK via numpy that add two things the raw
routines do not give us: an explicit numerical-rank decision with a
configurable relative tolerance, and a deterministic sign convention so
repeated runs (and different backends) produce identical factors.

Sign convention: in each column of the orthonormal factor, the entry of
largest magnitude is made nonnegative (first such entry on ties). The
paired factor is flipped accordingly so the product is unchanged.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatchError
from .validation import as_matrix

__all__ = ["ThinSvd", "ThinQr", "thin_svd", "thin_qr", "solve_ls", "default_rtol"]


def default_rtol(shape):
    """Rank tolerance relative to the largest singular value."""
    return max(shape) * np.finfo(np.float64).eps


def _fix_signs_svd(u, v):
    # flip matched column pairs so each u-column's largest entry is >= 0
    if u.shape[1] == 0:
        return u, v
    idx = np.argmax(np.abs(u), axis=0)
    flip = u[idx, np.arange(u.shape[1])] < 0
    u[:, flip] *= -1.0
    v[:, flip] *= -1.0
    return u, v


@dataclass(frozen=True)
class ThinSvd:
    """Rank-truncated thin SVD: A = u @ diag(sigma) @ v.T.

    u is (a, d), sigma is (d,) positive nonincreasing, v is (b, d),
    where d is the numerical rank at the tolerance used.
    """

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    @property
    def rank(self):
        return self.sigma.size


@dataclass(frozen=True)
class ThinQr:
    """Thin QR factorization A = q @ r with q (a, b) orthonormal."""

    q: np.ndarray
    r: np.ndarray


def thin_svd(a, rtol=None):
    """Thin SVD truncated at numerical rank.

    Parameters
    ----------
    a : array_like, shape (m, n), nonempty and finite.
    rtol : float, optional
        Singular values <= rtol * sigma_max are treated as zero.
        Defaults to max(m, n) * eps.

    Returns
    -------
    ThinSvd
    """
    a = as_matrix(a, "a")
    if a.size == 0:
        raise DimensionMismatchError("thin_svd requires a nonempty matrix")
    if rtol is None:
        rtol = default_rtol(a.shape)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s.size and s[0] > 0:
        d = int(np.count_nonzero(s > rtol * s[0]))
    else:
        d = 0
    u, v = _fix_signs_svd(u[:, :d].copy(), vt[:d].T.copy())
    return ThinSvd(u=u, sigma=s[:d].copy(), v=v)


def thin_qr(a):
    """Thin QR of a tall matrix (rows >= cols) with deterministic signs."""
    a = as_matrix(a, "a")
    m, n = a.shape
    if m < n:
        raise DimensionMismatchError(f"thin_qr needs rows >= cols, got {m} x {n}")
    q, r = np.linalg.qr(a, mode="reduced")
    if n:
        idx = np.argmax(np.abs(q), axis=0)
        flip = q[idx, np.arange(n)] < 0
        q[:, flip] *= -1.0
        r[flip, :] *= -1.0
    return ThinQr(q=q, r=r)


def solve_ls(y, omega, rtol=None):
    """Minimum-norm least-squares solve of G @ omega ~= y for G.

    Uses the rank-truncated pseudoinverse, G = y @ pinv(omega), so rank
    deficiency in omega is handled by dropping the null directions.
    """
    y = as_matrix(y, "y")
    omega = as_matrix(omega, "omega")
    if y.shape[1] != omega.shape[1]:
        raise DimensionMismatchError(
            f"y and omega need equal column counts, got {y.shape[1]} and {omega.shape[1]}"
        )
    f = thin_svd(omega, rtol=rtol)
    if f.rank == 0:
        return np.zeros((y.shape[0], omega.shape[0]))
    return (y @ f.v) / f.sigma @ f.u.T
