"""Low-rank plus sparse background removal for PIV image sequences."""

__version__ = "0.1.0"

from .decompose import (PodConfig, RpcaConfig, RpcaResult, min_removal, pod_decompose,
                        rpca_alm, singular_value_threshold, soft_threshold)
from .estimators import MinRemoval, PODBackground, RobustPCA
from .quality import QualityReport, evaluate, mse, psnr, ssim_global
from .seqio import FrameSequence, aggregate, load_sequence, scatter, store_sequence

__all__ = [
    "PodConfig", "RpcaConfig", "RpcaResult", "min_removal", "pod_decompose", "rpca_alm",
    "singular_value_threshold", "soft_threshold", "MinRemoval", "PODBackground",
    "RobustPCA", "QualityReport", "evaluate", "mse", "psnr", "ssim_global",
    "FrameSequence", "aggregate", "load_sequence", "scatter", "store_sequence",
]
