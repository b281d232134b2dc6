"""Input validation helpers shared by the numerical routines."""

import numpy as np

from .exceptions import DimensionMismatchError, NumericalError


def as_matrix(a, name="array"):
    """Coerce ``a`` to a 2-D float64 ndarray and reject non-finite entries."""
    out = np.asarray(a, dtype=np.float64)
    if out.ndim != 2:
        raise DimensionMismatchError(f"{name} must be 2-D, got ndim={out.ndim}")
    if out.size and not np.isfinite(out).all():
        raise NumericalError(f"{name} contains non-finite entries")
    return out


def as_vector(a, name="array"):
    """Coerce ``a`` to a 1-D float64 ndarray and reject non-finite entries."""
    out = np.asarray(a, dtype=np.float64)
    if out.ndim == 2 and 1 in out.shape:
        out = out.ravel()
    if out.ndim != 1:
        raise DimensionMismatchError(f"{name} must be 1-D, got ndim={out.ndim}")
    if out.size and not np.isfinite(out).all():
        raise NumericalError(f"{name} contains non-finite entries")
    return out


def check_finite(a, name="array"):
    if a.size and not np.isfinite(a).all():
        raise NumericalError(f"{name} contains non-finite entries")
    return a


def check_cols(a, n_cols, name="array"):
    if a.shape[1] != n_cols:
        raise DimensionMismatchError(
            f"{name} must have {n_cols} columns, got {a.shape[1]}"
        )
    return a


def check_orthonormal(L, tol=1e-10, name="L"):
    """Require L^T L = I within ``tol`` in the Frobenius norm."""
    r = L.shape[1]
    gram = L.T @ L
    err = np.linalg.norm(gram - np.eye(r))
    if err > tol:
        raise NumericalError(
            f"{name} is not orthonormal: ||L^T L - I||_F = {err:.3e} > {tol:.1e}"
        )
    return L
