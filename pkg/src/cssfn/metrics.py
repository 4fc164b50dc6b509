"""PSNR and SSIM on normalised intensities."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import ConfigurationError

WINDOW = 11
SIGMA = 1.5
K1, K2 = 0.01, 0.03


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ConfigurationError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def _mean(values: np.ndarray) -> float:
    # correctly rounded mean: fsum total plus its residual, divided exactly
    v = values.ravel().tolist()
    total = math.fsum(v)
    residual = math.fsum(v + [-total])
    return float((Fraction(total) + Fraction(residual)) / len(v))


def psnr(a, b, data_range: float = 1.0) -> float:
    """10 log10(L^2 / MSE); ``inf`` when the images are identical."""
    a, b = _pair(a, b)
    if data_range <= 0:
        raise ValueError("data_range must be positive")
    mse = _mean((a - b) ** 2)
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(data_range**2 / mse)


def gaussian_window(size: int = WINDOW, sigma: float = SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-(x**2) / (2 * sigma**2))
    return g / g.sum()


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    k = g.size
    rows = sliding_window_view(img, k, axis=0) @ g
    return sliding_window_view(rows, k, axis=1) @ g


def ssim_map(a, b, data_range: float = 1.0) -> np.ndarray:
    a, b = _pair(a, b)
    if a.ndim != 2:
        raise ConfigurationError(f"ssim expects a 2-D slice, got shape {a.shape}")
    if min(a.shape) < WINDOW:
        raise ConfigurationError(f"slice {a.shape} smaller than the {WINDOW}x{WINDOW} window")
    g = gaussian_window()
    c1 = (K1 * data_range) ** 2
    c2 = (K2 * data_range) ** 2
    mu_a, mu_b = _filter_valid(a, g), _filter_valid(b, g)
    var_a = _filter_valid(a * a, g) - mu_a * mu_a
    var_b = _filter_valid(b * b, g) - mu_b * mu_b
    cov = _filter_valid(a * b, g) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return num / den


def ssim(a, b, data_range: float = 1.0) -> float:
    """Mean SSIM with an 11x11 Gaussian window (sigma 1.5), valid region only."""
    return float(ssim_map(a, b, data_range).mean())


@dataclass
class MetricReport:
    psnr_db: float
    ssim: float
    per_slice: list[tuple[float, float]] = field(default_factory=list)


def evaluate_volume(pred, ref, data_range: float = 1.0) -> MetricReport:
    """Per-slice PSNR / SSIM averaged arithmetically over the slices."""
    pred = getattr(pred, "data", pred)
    ref = getattr(ref, "data", ref)
    pred, ref = _pair(pred, ref)
    if pred.ndim == 2:
        pred, ref = pred[None], ref[None]
    rows = [(psnr(p, r, data_range), ssim(p, r, data_range)) for p, r in zip(pred, ref)]
    return MetricReport(
        float(np.mean([p for p, _ in rows])),
        float(np.mean([s for _, s in rows])),
        rows,
    )
