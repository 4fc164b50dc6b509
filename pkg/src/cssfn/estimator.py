"""scikit-learn style wrappers: a super-resolution regressor and LR simulators."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_nchw, check_images, check_pair
from .data.degrade import degrade
from .data.patches import DatasetSpec, VolumePair
from .harness.config import TrainConfig
from .harness.trainer import Trainer, super_resolve
from .metrics import psnr
from .model.config import NetworkConfig


class CSSFNRegressor(RegressorMixin, BaseEstimator):
    """Learn an LR -> HR mapping with a CSSFN network.

    ``X`` holds LR images of shape (n, h, w) for single slices, or
    (n, C, h, w) with C channels (pseudo 3D); ``y`` holds the matching HR
    images, ``scale`` times larger.  ``score`` reports mean PSNR in dB on
    unit-range intensities instead of R^2.
    """

    def __init__(
        self,
        c=32,
        n=2,
        m=2,
        q=4,
        c_o=None,
        scale=2,
        gff="DGFF",
        bif="SF",
        max_iter=1000,
        batch_size=16,
        patch_size=24,
        learning_rate=1e-4,
        halving_period=200_000,
        augment=True,
        random_state=0,
    ):
        self.c = c
        self.n = n
        self.m = m
        self.q = q
        self.c_o = c_o
        self.scale = scale
        self.gff = gff
        self.bif = bif
        self.max_iter = max_iter
        self.batch_size = batch_size
        self.patch_size = patch_size
        self.learning_rate = learning_rate
        self.halving_period = halving_period
        self.augment = augment
        self.random_state = random_state

    def _train_config(self, X: np.ndarray) -> TrainConfig:
        ic = 1 if X.ndim == 3 else X.shape[1]
        net = NetworkConfig(
            c=self.c, n=self.n, m=self.m, q=self.q, c_o=self.c_o, r=self.scale, ic=ic,
            gff=self.gff, bif=self.bif, seed=int(self.random_state),
        )
        ds = DatasetSpec(
            source="in-memory", r=self.scale, execution="pure2D" if ic == 1 else "pseudo3D", seed=int(self.random_state)
        )
        return TrainConfig(
            network=net,
            dataset=ds,
            minibatch=self.batch_size,
            total_iterations=self.max_iter,
            base_lr=self.learning_rate,
            halving_period=self.halving_period,
            patch_size=min(self.patch_size, *X.shape[-2:]),
            augment=self.augment,
            log_every=max(self.max_iter, 1),
        )

    def fit(self, X, y):
        X, y = check_pair(X, y, self.scale)
        cfg = self._train_config(X)
        if X.ndim == 3:
            pairs = [VolumePair(y, X)]
        else:
            pairs = [VolumePair(hr, lr) for lr, hr in zip(X, y)]
        trainer = Trainer(cfg, pairs=(pairs, []))
        self.loss_curve_ = list(trainer.run())
        self.network_ = trainer.net
        self.n_iter_ = trainer.iteration
        self.n_channels_ = cfg.network.ic
        return self

    def predict(self, X):
        check_is_fitted(self, "network_")
        X = check_images(X)
        ic = 1 if X.ndim == 3 else X.shape[1]
        if ic != self.n_channels_:
            raise ValueError(f"X has {ic} channels, the model was fitted with {self.n_channels_}")
        if X.ndim == 3:
            return super_resolve(self.network_, X, "pure2D")
        return np.stack([super_resolve(self.network_, x, "pseudo3D") for x in X])

    def score(self, X, y, sample_weight=None):
        pred = self.predict(X)
        values = [psnr(p, t) for p, t in zip(as_nchw(pred), as_nchw(np.asarray(y, dtype=np.float64)))]
        return float(np.average(values, weights=sample_weight))


class Degrader(TransformerMixin, BaseEstimator):
    """Stateless LR simulator: ``method`` is ``"BD"`` or ``"TD"``."""

    def __init__(self, scale=2, method="BD"):
        self.scale = scale
        self.method = method

    def fit(self, X, y=None):
        check_images(X)
        return self

    def transform(self, X):
        return degrade(check_images(X), self.scale, self.method)
