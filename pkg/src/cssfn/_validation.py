"""Input checks shared by the estimator API."""
from __future__ import annotations

import numpy as np

from .tensor import ConfigurationError


def check_images(X, name: str = "X", min_size: int = 3) -> np.ndarray:
    """Return ``X`` as a finite float64 array of shape (N, H, W) or (N, C, H, W)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim not in (3, 4):
        raise ValueError(f"{name} must have shape (n, H, W) or (n, C, H, W), got {X.shape}")
    if X.shape[0] < 1:
        raise ValueError(f"{name} is empty")
    if min(X.shape[-2:]) < min_size:
        raise ValueError(f"{name} images are {X.shape[-2]}x{X.shape[-1]}, need at least {min_size}x{min_size}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains NaN or infinity")
    return X


def as_nchw(X: np.ndarray) -> np.ndarray:
    return X[:, None] if X.ndim == 3 else X


def check_pair(X, y, scale: int) -> tuple[np.ndarray, np.ndarray]:
    X = check_images(X, "X")
    y = check_images(y, "y")
    if X.ndim != y.ndim or X.shape[:-2] != y.shape[:-2]:
        raise ValueError(f"X {X.shape} and y {y.shape} disagree on leading dimensions")
    if (y.shape[-2], y.shape[-1]) != (scale * X.shape[-2], scale * X.shape[-1]):
        raise ConfigurationError(f"y must be {scale}x the size of X: got {X.shape[-2:]} -> {y.shape[-2:]}")
    return X, y
