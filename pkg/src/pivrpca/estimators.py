"""scikit-learn style background removers.

All three estimators take ``X`` of shape ``(n_frames, n_pixels)``, one
flattened frame per row, and follow the transformer convention:
``fit_transform(X)`` returns the foreground of ``X`` and ``background_``
holds the matching background, with ``background_ + foreground == X``.
``transform`` applies the fitted background model to new frames.
"""
from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import ConvergenceWarning
from sklearn.utils.validation import check_is_fitted, validate_data

from .decompose import AUTO, PodConfig, RpcaConfig, min_removal, pod_decompose, rpca_alm
from .matcore import svd


def _row_basis(a: np.ndarray, rank: int) -> np.ndarray:
    if rank == 0:
        return np.zeros((0, a.shape[1]))
    return svd(a).v[:, :rank].T


class _BackgroundModel(TransformerMixin, BaseEstimator):
    def _store(self, background, foreground):
        self.background_ = background
        self.foreground_ = foreground

    def fit(self, X, y=None):
        self._fit(X)
        return self

    def fit_transform(self, X, y=None, **fit_params):
        self._fit(X)
        return self.foreground_

    def transform(self, X):
        """Remove the projection of each frame onto the background subspace."""
        check_is_fitted(self, "components_")
        X = validate_data(self, X, reset=False, dtype=np.float64)
        return X - (X @ self.components_.T) @ self.components_

    def background(self, X):
        return X - self.transform(X)


class RobustPCA(_BackgroundModel):
    """Low-rank background plus sparse foreground by inexact ALM.

    Parameters
    ----------
    lam : float or "auto"
        Weight of the l1 term; "auto" uses ``1/sqrt(n_pixels)``.
    mu0 : float or "auto"
        Initial penalty; "auto" uses ``1.25 / ||X||_2``.
    rho : float
        Penalty growth per iteration.
    tol : float
        Relative residual at which iteration stops.
    max_iter : int
    mu_cap : float or "auto"
        Upper bound on the penalty; "auto" is ``1e10 * mu0``.

    Attributes
    ----------
    background_, foreground_ : ndarray of shape (n_frames, n_pixels)
    components_ : ndarray of shape (rank_, n_pixels)
        Orthonormal basis of the background's row space.
    lambda_, n_iter_, converged_, residuals_, rank_
    """

    def __init__(self, lam=AUTO, mu0=AUTO, rho=1.5, tol=1e-7, max_iter=500, mu_cap=AUTO):
        self.lam = lam
        self.mu0 = mu0
        self.rho = rho
        self.tol = tol
        self.max_iter = max_iter
        self.mu_cap = mu_cap

    def _config(self) -> RpcaConfig:
        return RpcaConfig(lam=self.lam, mu0=self.mu0, rho=self.rho, tol=self.tol,
                          max_iters=self.max_iter, mu_cap=self.mu_cap)

    def _fit(self, X):
        X = validate_data(self, X, dtype=np.float64)
        res = rpca_alm(X.T, self._config())
        self._store(res.low_rank.T, res.sparse.T)
        self.result_ = res
        self.lambda_ = res.lam
        self.n_iter_ = res.iterations
        self.converged_ = res.converged
        self.residuals_ = list(res.residual_trace)
        self.rank_ = res.rank_of_l
        self.components_ = _row_basis(self.background_, self.rank_)
        if not res.converged:
            warnings.warn(f"RobustPCA stopped after {res.iterations} iterations at "
                          f"relative residual {res.residual_trace[-1]:.3g}",
                          ConvergenceWarning)


class PODBackground(_BackgroundModel):
    """Background as the leading POD modes of the frame stack (no mean removal).

    Set `energy_threshold` to pick the smallest rank whose modes capture that
    fraction of the total energy; it overrides `rank`.
    """

    def __init__(self, rank=1, energy_threshold=None):
        self.rank = rank
        self.energy_threshold = energy_threshold

    def _fit(self, X):
        X = validate_data(self, X, dtype=np.float64)
        cfg = PodConfig(rank=self.rank, energy_threshold=self.energy_threshold)
        bg, fg = pod_decompose(X.T, cfg)
        self._store(bg.T, fg.T)
        f = svd(X)
        self.rank_ = cfg.resolve_rank(f.sigma)
        self.singular_values_ = f.sigma
        self.components_ = f.v[:, :self.rank_].T


class MinRemoval(_BackgroundModel):
    """Per-pixel minimum over the fitted frames as a static background."""

    def _fit(self, X):
        X = validate_data(self, X, dtype=np.float64)
        bg, fg = min_removal(X.T)
        self._store(bg.T, fg.T)
        self.min_ = bg[:, 0].copy()

    def transform(self, X):
        check_is_fitted(self, "min_")
        X = validate_data(self, X, reset=False, dtype=np.float64)
        return X - self.min_
