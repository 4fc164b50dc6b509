"""Separable cubic-convolution resampling (Keys kernel, a = -0.5).

Pixel centres are aligned (half-pixel convention); when shrinking, the
kernel is widened by the reduction factor so the filter also acts as an
anti-alias prefilter.  Borders use half-sample symmetric reflection,
which keeps constants fixed and preserves the image mean under integer
downscaling.
"""
from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

import numpy as np

from .tensor import ConfigurationError

KEYS_A = -0.5


def keys_kernel(x, a: float = KEYS_A):
    x = np.abs(np.asarray(x, dtype=np.float64))
    x2, x3 = x * x, x * x * x
    near = (a + 2.0) * x3 - (a + 3.0) * x2 + 1.0
    far = a * x3 - 5.0 * a * x2 + 8.0 * a * x - 4.0 * a
    return np.where(x <= 1.0, near, np.where(x < 2.0, far, 0.0))


def _reflect(i: int, n: int) -> int:
    period = 2 * n
    i %= period
    return i if i < n else period - 1 - i


@lru_cache(maxsize=64)
def resize_matrix(n_in: int, n_out: int) -> np.ndarray:
    """(n_out, n_in) matrix applying 1-D cubic resampling along one axis."""
    scale = n_out / n_in
    stretch = min(scale, 1.0)
    support = 2.0 / stretch
    mat = np.zeros((n_out, n_in))
    for j in range(n_out):
        centre = (j + 0.5) / scale - 0.5
        lo = int(np.floor(centre - support))
        hi = int(np.ceil(centre + support))
        taps = np.arange(lo, hi + 1)
        weights = keys_kernel((taps - centre) * stretch)
        for i, w in zip(taps, weights):
            if w != 0.0:
                mat[j, _reflect(int(i), n_in)] += w
        mat[j] /= mat[j].sum()
    mat.setflags(write=False)
    return mat


def _as_fraction(scale) -> Fraction:
    if isinstance(scale, Fraction):
        return scale
    if isinstance(scale, int):
        return Fraction(scale)
    return Fraction(float(scale)).limit_denominator(1000)


def output_size(n: int, scale) -> int:
    s = _as_fraction(scale)
    if s <= 0:
        raise ConfigurationError(f"scale must be positive, got {scale}")
    size = n * s
    if size.denominator != 1:
        raise ConfigurationError(f"scale {s} does not map size {n} to an integer size")
    return int(size)


def bicubic_resize(x: np.ndarray, scale) -> np.ndarray:
    """Resample the last two axes of ``x`` by ``scale`` (e.g. 2, 3, 4 or 1/r)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 2:
        raise ConfigurationError("bicubic_resize needs at least a 2-D array")
    h, w = x.shape[-2:]
    ah = resize_matrix(h, output_size(h, scale))
    aw = resize_matrix(w, output_size(w, scale))
    return np.matmul(np.matmul(ah, x), aw.T)


def upscale(x: np.ndarray, r: int) -> np.ndarray:
    return bicubic_resize(x, Fraction(r))


def downscale(x: np.ndarray, r: int) -> np.ndarray:
    h, w = np.shape(x)[-2:]
    if h % r or w % r:
        raise ConfigurationError(f"downscale by {r} needs sizes divisible by {r}, got {h}x{w}")
    return bicubic_resize(x, Fraction(1, r))
