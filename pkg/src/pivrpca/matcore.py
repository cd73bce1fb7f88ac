"""Dense matrix helpers: validation, thin SVD and the norms used by the solvers.

Matrices are plain ``float64`` numpy arrays of shape ``(rows, cols)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import FactorizationError

# singular values below this fraction of sigma_max are reported as exact zeros
_SIGMA_CLAMP = 1e-12


def as_matrix(a, name="a") -> np.ndarray:
    """Return `a` as a finite 2-D float64 array, raising ``ValueError`` otherwise."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``a = u @ diag(sigma) @ v.T`` with ``r = min(m, n)``."""

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.sigma))

    def reconstruct(self, sigma=None) -> np.ndarray:
        s = self.sigma if sigma is None else sigma
        keep = s > 0
        return (self.u[:, keep] * s[keep]) @ self.v[:, keep].T


def svd(a) -> SvdFactors:
    """Thin singular value decomposition.

    Singular values smaller than ``1e-12 * sigma_max`` are clamped to 0.

    Raises
    ------
    FactorizationError
        If LAPACK fails to converge.
    """
    a = as_matrix(a)
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(a.shape) from exc
    if s.size and s[0] > 0:
        s = np.where(s < _SIGMA_CLAMP * s[0], 0.0, s)
    else:
        s = np.zeros_like(s)
    return SvdFactors(u=u, sigma=s, v=vt.T)


def singular_values(a) -> np.ndarray:
    a = as_matrix(a)
    try:
        s = np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(a.shape) from exc
    if s.size and s[0] > 0:
        s = np.where(s < _SIGMA_CLAMP * s[0], 0.0, s)
    return s


def frobenius_norm(a) -> float:
    return float(np.linalg.norm(as_matrix(a), "fro"))


def l1_norm(a) -> float:
    """Entrywise l1 norm (sum of absolute values), not the induced 1-norm."""
    return float(np.abs(as_matrix(a)).sum())


def nuclear_norm(a) -> float:
    return float(singular_values(a).sum())


def spectral_norm(a) -> float:
    s = singular_values(a)
    return float(s[0]) if s.size else 0.0


def matrix_rank(a) -> int:
    return int(np.count_nonzero(singular_values(a)))
