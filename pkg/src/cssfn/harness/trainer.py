"""Deterministic training loop: sample, augment, forward, L1, backward, Adam."""
from __future__ import annotations

import csv
import logging
import math
from pathlib import Path

import numpy as np

from ..data.patches import PatchBatch, augment_batch, extract_patches, make_pair
from ..metrics import evaluate_volume
from ..model.network import Network, build_network
from ..optim import AdamState, adam_step
from ..tensor import l1_loss, l1_loss_backward
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import TrainConfig, dump_config, lr_schedule, parse_config_text

log = logging.getLogger(__name__)

LOG_COLUMNS = ("iteration", "lr", "train_l1", "val_psnr", "val_ssim")


class TrainingDiverged(RuntimeError):
    pass


def _streams(seed: int):
    # independent streams: weight init, fixed patch pool, per-iteration sampling
    init, pool, data = np.random.SeedSequence(seed).spawn(3)
    return np.random.default_rng(init), np.random.default_rng(pool), np.random.default_rng(data)


def super_resolve(net: Network, lr: np.ndarray, execution: str, batch: int = 8) -> np.ndarray:
    """SR a (S, h, w) LR stack slice by slice, or as one multi-channel image."""
    if execution == "pseudo3D":
        out = net.forward(lr[None])[0]
        net.release()
        return out
    outs = []
    for i in range(0, lr.shape[0], batch):
        outs.append(net.forward(lr[i : i + batch, None])[:, 0])
        net.release()
    return np.concatenate(outs, axis=0)


class Trainer:
    def __init__(self, cfg: TrainConfig, out_dir=None, volumes=None, pairs=None):
        self.cfg = cfg
        self.out_dir = Path(out_dir) if out_dir is not None else None
        init_rng, pool_rng, self.rng = _streams(cfg.network.seed)
        self.net = build_network(cfg.network, init_rng)
        self.adam = AdamState(cfg.beta1, cfg.beta2, cfg.eps)
        self.iteration = 0
        self.loss_history: list[float] = []

        ds = cfg.dataset
        if pairs is not None:
            # already-degraded (train, validation) pairs supplied by the caller
            self.train_pairs, self.val_pairs = list(pairs[0]), list(pairs[1])
        else:
            volumes = volumes if volumes is not None else ds.load()
            self.train_pairs = [make_pair(v, ds.r, ds.degradation) for v in volumes["train"]]
            self.val_pairs = [make_pair(v, ds.r, ds.degradation) for v in volumes["validation"]]
        if not self.train_pairs:
            raise ValueError("dataset has no training volumes")
        if cfg.validate_every and not self.val_pairs:
            raise ValueError("validate_every is set but the dataset has no validation volumes")
        self.pool: PatchBatch | None = None
        if cfg.patch_pool:
            self.pool = extract_patches(
                self.train_pairs, cfg.patch_size, cfg.patch_pool, pool_rng, ds.r, ds.execution
            )

    # one step -----------------------------------------------------------

    def next_batch(self) -> PatchBatch:
        cfg, ds = self.cfg, self.cfg.dataset
        if self.pool is not None:
            if cfg.minibatch == cfg.patch_pool:
                batch = self.pool
            else:
                idx = np.sort(self.rng.choice(cfg.patch_pool, cfg.minibatch, replace=False))
                batch = PatchBatch(self.pool.lr[idx], self.pool.hr[idx], [self.pool.provenance[i] for i in idx])
        else:
            batch = extract_patches(self.train_pairs, cfg.patch_size, cfg.minibatch, self.rng, ds.r, ds.execution)
        if cfg.augment:
            batch = augment_batch(batch, self.rng)
        return batch

    def step(self) -> float:
        lr = lr_schedule(self.iteration, self.cfg)
        batch = self.next_batch()
        pred = self.net.forward(batch.lr)
        loss = l1_loss(pred, batch.hr)
        if not math.isfinite(loss):
            raise TrainingDiverged(f"non-finite training loss {loss} at iteration {self.iteration}")
        grads = self.net.backward(l1_loss_backward(pred, batch.hr))
        self.net.release()
        adam_step(self.net.parameters(), grads, self.adam, lr)
        self.iteration += 1
        self.loss_history.append(loss)
        return loss

    # validation ---------------------------------------------------------

    def validate(self) -> tuple[float, float]:
        ds = self.cfg.dataset
        psnrs, ssims = [], []
        for pair in self.val_pairs:
            if ds.execution == "pseudo3D":
                hr, lr = pair.hr, pair.lr
            else:
                idx = np.unique(np.linspace(0, pair.hr.shape[0] - 1, self.cfg.val_slices).round().astype(int))
                hr, lr = pair.hr[idx], pair.lr[idx]
            rep = evaluate_volume(super_resolve(self.net, lr, ds.execution), hr)
            psnrs.append(rep.psnr_db)
            ssims.append(rep.ssim)
        return float(np.mean(psnrs)), float(np.mean(ssims))

    # checkpoints --------------------------------------------------------

    def checkpoint(self) -> Checkpoint:
        return Checkpoint(
            dump_config(self.cfg),
            self.iteration,
            self.net.state_dict(),
            _copy_adam(self.adam),
            self.rng.bit_generator.state,
            list(self.loss_history),
        )

    def save(self, path=None) -> Path:
        if path is None:
            if self.out_dir is None:
                raise ValueError("no output directory configured")
            path = self.out_dir / "checkpoint.csck"
        save_checkpoint(self.checkpoint(), path)
        return Path(path)

    def restore(self, ckpt: Checkpoint):
        self.net.load_state_dict(ckpt.params)
        self.adam = _copy_adam(ckpt.adam)
        self.rng.bit_generator.state = ckpt.rng_state
        self.iteration = ckpt.iteration
        self.loss_history = list(ckpt.loss_history)

    @classmethod
    def from_checkpoint(cls, path, out_dir=None, volumes=None) -> "Trainer":
        ckpt = load_checkpoint(path)
        trainer = cls(parse_config_text(ckpt.config_text, origin=str(path)), out_dir, volumes)
        trainer.restore(ckpt)
        return trainer

    # main loop ----------------------------------------------------------

    def run(self, until: int | None = None) -> list[float]:
        """Train up to iteration ``until`` (default: the configured total)."""
        cfg = self.cfg
        until = cfg.total_iterations if until is None else until
        writer = self._open_log()
        try:
            while self.iteration < until:
                self.step()
                it = self.iteration
                validate = cfg.validate_every and it % cfg.validate_every == 0
                if validate or it % cfg.log_every == 0 or it == until:
                    vp, vs = self.validate() if validate else ("", "")
                    # mean since the last regular log point, so resumed runs log the same values
                    window = self.loss_history[(it - 1) // cfg.log_every * cfg.log_every : it]
                    row = (it, repr(lr_schedule(it - 1, cfg)), repr(float(np.mean(window))), vp, vs)
                    if writer is not None:
                        writer[1].writerow(row)
                        writer[0].flush()
                    log.info("iter %d lr %s l1 %s val %s %s", *row)
                if self.out_dir is not None and cfg.checkpoint_every and it % cfg.checkpoint_every == 0:
                    self.save()
        finally:
            if writer is not None:
                writer[0].close()
        if self.out_dir is not None:
            self.save()
        return self.loss_history

    def _open_log(self):
        if self.out_dir is None:
            return None
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / "log.csv"
        kept = []
        if path.exists() and self.iteration > 0:
            # drop rows past the restored iteration so the log matches the trajectory
            with open(path, newline="") as f:
                rows = list(csv.reader(f))
            kept = [r for r in rows[1:] if r and int(r[0]) <= self.iteration]
        f = open(path, "w", newline="")
        w = csv.writer(f)
        w.writerow(LOG_COLUMNS)
        w.writerows(kept)
        return f, w


def _copy_adam(a: AdamState) -> AdamState:
    return AdamState(
        a.beta1, a.beta2, a.eps, a.t, {k: v.copy() for k, v in a.m.items()}, {k: v.copy() for k, v in a.v.items()}
    )
