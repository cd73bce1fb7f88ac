"""Background/foreground decompositions of a data matrix.

The data matrix ``d`` has one vectorized frame per column (pixels x frames).
Every routine returns components whose entrywise float64 sum reproduces ``d``
(see :func:`split_exact`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .exceptions import NumericalDivergenceError
from .matcore import as_matrix, frobenius_norm, spectral_norm, svd

AUTO = "auto"


def soft_threshold(x, eps: float) -> np.ndarray:
    """Elementwise shrinkage ``sign(x) * max(|x| - eps, 0)``.

    This is the proximal map of ``eps * ||.||_1``.
    """
    if eps < 0:
        raise ValueError(f"eps must be nonnegative, got {eps}")
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.maximum(np.abs(x) - eps, 0.0)


def _svt(a: np.ndarray, tau: float):
    f = svd(a)
    shrunk = soft_threshold(f.sigma, tau)
    return f.reconstruct(shrunk), int(np.count_nonzero(shrunk))


def singular_value_threshold(a, tau: float) -> np.ndarray:
    """Shrink the singular values of `a` by `tau` (proximal map of ``tau * ||.||_*``)."""
    if tau < 0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    return _svt(as_matrix(a), tau)[0]


def _ulp_steps(x: np.ndarray, k: int) -> np.ndarray:
    toward = np.inf if k > 0 else -np.inf
    for _ in range(abs(k)):
        x = np.nextafter(x, toward)
    return x


def split_exact(d: np.ndarray, background: np.ndarray, nonneg_foreground: bool = False):
    """Return ``(background, foreground)`` with ``background + foreground == d``.

    The foreground starts as ``d - background``. Entries whose float sum
    misses ``d`` (rounding in the subtraction, round-half-even ties) are
    repaired by a bounded search that first moves only the foreground, then
    moves the background by up to two ulps. With `nonneg_foreground`, only
    candidates with a foreground >= 0 are accepted.

    Exactness is impossible when the grid of the sum (the ulp of the larger
    component) is coarser than the lowest set bit of ``d``, e.g. a dark pixel
    under a brighter background estimate; those entries keep
    ``d - background``.
    """
    bg = np.array(background, dtype=np.float64)
    fg = d - bg
    bgf, fgf, df = bg.reshape(-1), fg.reshape(-1), d.reshape(-1)
    bad = np.flatnonzero(bgf + fgf != df)
    if bad.size == 0:
        return bg, fg

    b, f, t = bgf[bad], fgf[bad], df[bad]
    err = t - (b + f)
    candidates = [(b, f + err)]
    candidates += [(b, _ulp_steps(f, k)) for k in (1, -1, 2, -2)]
    candidates.append((b + err, f))
    for k in (1, -1, 2, -2):
        b2 = _ulp_steps(b, k)
        candidates.append((b2, t - b2))
        candidates += [(b2, _ulp_steps(t - b2, j)) for j in (1, -1)]

    open_ = np.ones(bad.size, dtype=bool)
    for cb, cf in candidates:
        hit = open_ & (cb + cf == t)
        if nonneg_foreground:
            hit &= cf >= 0
        bgf[bad[hit]] = cb[hit]
        fgf[bad[hit]] = cf[hit]
        open_ &= ~hit
        if not open_.any():
            break
    return bg, fg

    b, f, t = bgf[bad], fgf[bad], df[bad]
    err = t - (b + f)
    candidates = []
    if not keep_background:
        candidates.append((b + err, f))
        for k in (1, -1, 2, -2):
            b2 = _ulp_steps(b, k)
            candidates.append((b2, t - b2))
            for j in (1, -1):
                candidates.append((b2, _ulp_steps(t - b2, j)))
    candidates.append((b, f + err))
    for k in (1, -1, 2, -2):
        candidates.append((b, _ulp_steps(f, k)))

    open_ = np.ones(bad.size, dtype=bool)
    for cb, cf in candidates:
        hit = open_ & (cb + cf == t)
        bgf[bad[hit]] = cb[hit]
        fgf[bad[hit]] = cf[hit]
        open_ &= ~hit
        if not open_.any():
            break
    return bg, fg


@dataclass(frozen=True)
class RpcaConfig:
    """Inexact ALM settings. ``lam``/``mu0``/``mu_cap`` accept ``"auto"``."""

    lam: Union[float, str] = AUTO
    mu0: Union[float, str] = AUTO
    rho: float = 1.5
    tol: float = 1e-7
    max_iters: int = 500
    mu_cap: Union[float, str] = AUTO

    def __post_init__(self):
        if self.rho <= 1:
            raise ValueError(f"rho must be > 1, got {self.rho}")
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError(f"max_iters must be a positive integer, got {self.max_iters}")
        for name in ("lam", "mu0", "mu_cap"):
            value = getattr(self, name)
            if value == AUTO:
                continue
            if isinstance(value, str) or not value > 0 or not math.isfinite(value):
                raise ValueError(f"{name} must be a positive real or 'auto', got {value!r}")
        if self.mu0 != AUTO and self.mu_cap != AUTO and self.mu_cap < self.mu0:
            raise ValueError("mu_cap must be >= mu0")

    def resolve_lambda(self, n_pixels: int) -> float:
        if self.lam == AUTO:
            return 1.0 / math.sqrt(n_pixels)
        return float(self.lam)

    def as_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "mu0": self.mu0,
            "rho": self.rho,
            "tol": self.tol,
            "max_iters": self.max_iters,
            "mu_cap": self.mu_cap,
        }


@dataclass(frozen=True)
class RpcaResult:
    low_rank: np.ndarray
    sparse: np.ndarray
    iterations: int
    converged: bool
    residual_trace: list = field(default_factory=list)
    rank_of_l: int = 0
    sparsity_of_s: float = 0.0
    lam: float = float("nan")
    mu0: float = float("nan")


def rpca_alm(d, cfg: Optional[RpcaConfig] = None) -> RpcaResult:
    """Robust PCA ``min ||L||_* + lam ||S||_1  s.t.  L + S = d`` by inexact ALM.

    Each outer iteration takes one singular value thresholding step for L,
    one shrinkage step for S, then a dual ascent step on Y and a geometric
    increase of the penalty ``mu`` (capped at ``mu_cap``). Iteration stops
    once ``||d - L - S||_F / ||d||_F <= tol`` or after ``max_iters`` steps.

    Parameters
    ----------
    d : array_like, shape (n_pixels, n_frames)
        Data matrix, one vectorized frame per column.
    cfg : RpcaConfig, optional

    Returns
    -------
    RpcaResult
        ``sparse`` is reassigned to ``d - low_rank`` on exit.

    Raises
    ------
    NumericalDivergenceError
        If an iterate becomes non-finite.
    """
    cfg = cfg or RpcaConfig()
    d = as_matrix(np.asarray(d), "d")
    lam = cfg.resolve_lambda(d.shape[0])
    norm_d = frobenius_norm(d)
    denom = max(norm_d, 1e-12)
    two_norm = spectral_norm(d)

    if two_norm == 0.0:
        zero = np.zeros_like(d)
        return RpcaResult(zero, zero.copy(), iterations=1, converged=True,
                          residual_trace=[0.0], rank_of_l=0, sparsity_of_s=0.0,
                          lam=lam, mu0=float("nan"))

    mu = 1.25 / two_norm if cfg.mu0 == AUTO else float(cfg.mu0)
    mu0 = mu
    mu_cap = 1e10 * mu0 if cfg.mu_cap == AUTO else float(cfg.mu_cap)
    dual_scale = max(two_norm, np.abs(d).max() / lam)
    y = d / dual_scale
    s = np.zeros_like(d)
    low = np.zeros_like(d)
    rank = 0
    trace = []
    converged = False

    for k in range(1, int(cfg.max_iters) + 1):
        inv_mu = 1.0 / mu
        low, rank = _svt(d - s + inv_mu * y, inv_mu)
        s = soft_threshold(d - low + inv_mu * y, lam * inv_mu)
        resid = d - low - s
        y = y + mu * resid
        err = float(np.linalg.norm(resid, "fro")) / denom
        if not (math.isfinite(err) and np.isfinite(y).all()):
            raise NumericalDivergenceError(k)
        trace.append(err)
        if err <= cfg.tol:
            converged = True
            break
        mu = min(mu * cfg.rho, mu_cap)

    low, sparse = split_exact(d, low)
    return RpcaResult(
        low_rank=low,
        sparse=sparse,
        iterations=len(trace),
        converged=converged,
        residual_trace=trace,
        rank_of_l=rank,
        sparsity_of_s=float(np.count_nonzero(s)) / s.size,
        lam=lam,
        mu0=mu0,
    )


@dataclass(frozen=True)
class PodConfig:
    """Either a fixed ``rank`` or an ``energy_threshold`` in (0, 1]."""

    rank: Optional[int] = 1
    energy_threshold: Optional[float] = None

    def __post_init__(self):
        if self.energy_threshold is not None:
            if not 0 < self.energy_threshold <= 1:
                raise ValueError("energy_threshold must lie in (0, 1]")
        elif self.rank is None or self.rank < 1:
            raise ValueError("rank must be a positive integer")

    def resolve_rank(self, sigma: np.ndarray) -> int:
        if self.energy_threshold is None:
            return int(self.rank)
        energy = np.cumsum(sigma**2)
        if energy[-1] == 0:
            return 1
        # small slack so thresholds hit exactly by a prefix are not missed to rounding
        k = int(np.searchsorted(energy / energy[-1], self.energy_threshold - 1e-12) + 1)
        return min(k, sigma.size)


def pod_decompose(d, cfg: Optional[PodConfig] = None):
    """Leading-mode SVD reconstruction as background; no mean removal.

    Returns
    -------
    background, foreground : ndarray
    """
    cfg = cfg or PodConfig()
    d = as_matrix(np.asarray(d), "d")
    f = svd(d)
    k = cfg.resolve_rank(f.sigma)
    if k > min(d.shape):
        raise ValueError(f"rank {k} exceeds min(m, n) = {min(d.shape)}")
    sigma = f.sigma.copy()
    sigma[k:] = 0.0
    return split_exact(d, f.reconstruct(sigma))


def min_removal(d):
    """Per-pixel temporal minimum as the background.

    Returns
    -------
    background, foreground : ndarray
    """
    d = as_matrix(np.asarray(d), "d")
    base = d.min(axis=1, keepdims=True)
    background = np.repeat(base, d.shape[1], axis=1)
    # exact additivity can force a background entry off the column minimum
    # by an ulp or two (see split_exact)
    return split_exact(d, background, nonneg_foreground=True)
