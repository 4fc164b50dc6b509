"""LR simulation: bicubic downsampling (BD) and k-space truncation (TD)."""
from __future__ import annotations

import numpy as np

from ..resize import downscale
from ..tensor import ConfigurationError

DEGRADATIONS = ("BD", "TD")


def _check_divisible(x: np.ndarray, r: int):
    h, w = x.shape[-2:]
    if r < 1 or h % r or w % r:
        raise ConfigurationError(f"scale {r} must divide the slice size {h}x{w}")


def bicubic_degrade(hr: np.ndarray, r: int) -> np.ndarray:
    _check_divisible(np.asarray(hr), r)
    return downscale(hr, r)


def _centred_block(n: int, m: int) -> slice:
    # fftshift puts DC at n // 2; the block keeps m bins around it, the
    # extra bin of an even m falling on the negative side
    start = n // 2 - m // 2
    return slice(start, start + m)


def kspace_truncate(hr: np.ndarray, r: int, magnitude: bool = True) -> np.ndarray:
    """Keep the central (H/r, W/r) block of the centred spectrum.

    The spectrum is scaled by 1/r^2 so constants are fixed points.  With
    ``magnitude=True`` the complex result is reduced to its modulus (MR
    magnitude images); otherwise the real part is returned.
    """
    hr = np.asarray(hr, dtype=np.float64)
    _check_divisible(hr, r)
    h, w = hr.shape[-2:]
    spec = np.fft.fftshift(np.fft.fft2(hr), axes=(-2, -1))
    block = spec[..., _centred_block(h, h // r), _centred_block(w, w // r)]
    lr = np.fft.ifft2(np.fft.ifftshift(block, axes=(-2, -1))) / (r * r)
    return np.abs(lr) if magnitude else lr.real


def spectral_upsample(lr: np.ndarray, r: int) -> np.ndarray:
    """Zero-padded inverse of :func:`kspace_truncate` (real part)."""
    lr = np.asarray(lr, dtype=np.float64)
    h, w = lr.shape[-2:]
    spec = np.fft.fftshift(np.fft.fft2(lr), axes=(-2, -1))
    full = np.zeros(lr.shape[:-2] + (h * r, w * r), dtype=complex)
    full[..., _centred_block(h * r, h), _centred_block(w * r, w)] = spec
    return (np.fft.ifft2(np.fft.ifftshift(full, axes=(-2, -1))) * (r * r)).real


def degrade(hr: np.ndarray, r: int, mode: str) -> np.ndarray:
    """Apply BD or TD to every slice in the last two axes."""
    if mode == "BD":
        return bicubic_degrade(hr, r)
    if mode == "TD":
        return kspace_truncate(hr, r)
    raise ConfigurationError(f"degradation must be one of {DEGRADATIONS}, got {mode!r}")
