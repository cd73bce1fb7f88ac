"""Full-reference image quality metrics: MSE, PSNR and single-window SSIM."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np


def _pair(truth, estimate):
    f = np.asarray(truth, dtype=np.float64)
    g = np.asarray(estimate, dtype=np.float64)
    if f.shape != g.shape:
        raise ValueError(f"shape mismatch: {f.shape} vs {g.shape}")
    if f.size == 0:
        raise ValueError("empty images")
    return f, g


def _check_range(dynamic_range):
    if not dynamic_range > 0:
        raise ValueError(f"dynamic_range must be positive, got {dynamic_range}")


def mse(truth, estimate) -> float:
    f, g = _pair(truth, estimate)
    return float(np.mean((f - g) ** 2))


def psnr(truth, estimate, dynamic_range: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` for identical images."""
    _check_range(dynamic_range)
    err = mse(truth, estimate)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(dynamic_range**2 / err)


def ssim_global(truth, estimate, dynamic_range: float = 1.0) -> float:
    """SSIM evaluated once over the whole image (no sliding window).

    Means, variances and covariance are population statistics over all
    pixels; the stabilizers are ``C1 = (0.01 L)^2`` and ``C2 = (0.03 L)^2``.
    """
    _check_range(dynamic_range)
    f, g = _pair(truth, estimate)
    if np.array_equal(f, g):
        # rounding in the moments would otherwise leave 1 - O(eps)
        return 1.0
    c1 = (0.01 * dynamic_range) ** 2
    c2 = (0.03 * dynamic_range) ** 2
    mu_f, mu_g = f.mean(), g.mean()
    df, dg = f - mu_f, g - mu_g
    var_f, var_g = np.mean(df * df), np.mean(dg * dg)
    cov = np.mean(df * dg)
    num = (2 * mu_f * mu_g + c1) * (2 * cov + c2)
    den = (mu_f**2 + mu_g**2 + c1) * (var_f + var_g + c2)
    return float(num / den)


@dataclass(frozen=True)
class FrameQuality:
    frame_index: int
    mse: float
    psnr: float
    ssim: float


@dataclass
class QualityReport:
    per_frame: List[FrameQuality] = field(default_factory=list)
    dynamic_range: float = 1.0

    @property
    def mean_mse(self) -> float:
        return float(np.mean([q.mse for q in self.per_frame])) if self.per_frame else math.nan

    @property
    def mean_ssim(self) -> float:
        return float(np.mean([q.ssim for q in self.per_frame])) if self.per_frame else math.nan

    @property
    def infinite_psnr_count(self) -> int:
        return sum(math.isinf(q.psnr) for q in self.per_frame)

    @property
    def mean_psnr(self) -> float:
        """Mean over finite entries; ``inf`` when every frame is exact."""
        finite = [q.psnr for q in self.per_frame if not math.isinf(q.psnr)]
        if finite:
            return float(np.mean(finite))
        return math.inf if self.per_frame else math.nan


def evaluate(truth_frames: Sequence, estimate_frames: Sequence,
             dynamic_range: float = 1.0) -> QualityReport:
    """Compare two equally long frame lists metric by metric."""
    _check_range(dynamic_range)
    if len(truth_frames) != len(estimate_frames):
        raise ValueError(
            f"frame count mismatch: {len(truth_frames)} vs {len(estimate_frames)}")
    rows = []
    for i, (f, g) in enumerate(zip(truth_frames, estimate_frames)):
        rows.append(FrameQuality(i, mse(f, g), psnr(f, g, dynamic_range),
                                 ssim_global(f, g, dynamic_range)))
    return QualityReport(per_frame=rows, dynamic_range=float(dynamic_range))
