"""Channel splitting and serial fusion network (CSSFN) for MR image super-resolution."""
from .data import bicubic_degrade, degrade, kspace_truncate, synth_phantom
from .estimator import CSSFNRegressor, Degrader
from .metrics import evaluate_volume, psnr, ssim
from .model import NetworkConfig, build_network, compute_depth, count_params
from .tensor import ConfigurationError, Tensor

__version__ = "0.1.0"

__all__ = [
    "CSSFNRegressor",
    "ConfigurationError",
    "Degrader",
    "NetworkConfig",
    "Tensor",
    "bicubic_degrade",
    "build_network",
    "compute_depth",
    "count_params",
    "degrade",
    "evaluate_volume",
    "kspace_truncate",
    "psnr",
    "ssim",
    "synth_phantom",
]
