"""Training pairs: dataset description, aligned patch sampling, augmentation."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..tensor import ConfigurationError
from .degrade import DEGRADATIONS, degrade
from .volume import PhantomParams, Volume, load_volume, partition, read_manifest, synth_phantom

EXECUTIONS = ("pure2D", "pseudo3D")


@dataclass
class DatasetSpec:
    """Where volumes come from and how LR inputs are simulated.

    ``source`` is either ``"synthetic"`` or the path of a manifest file.
    """

    source: str = "synthetic"
    degradation: str = "BD"
    r: int = 2
    execution: str = "pure2D"
    seed: int = 0
    n_volumes: int = 3
    split_fractions: tuple[float, float, float] = (0.34, 0.33, 0.33)
    phantom: PhantomParams = field(default_factory=PhantomParams)

    def __post_init__(self):
        if self.degradation not in DEGRADATIONS:
            raise ConfigurationError(f"degradation must be one of {DEGRADATIONS}, got {self.degradation!r}")
        if self.execution not in EXECUTIONS:
            raise ConfigurationError(f"execution must be one of {EXECUTIONS}, got {self.execution!r}")

    def load(self) -> dict[str, list[Volume]]:
        """Volumes grouped by split; the grouping is disjoint and exhaustive."""
        out: dict[str, list[Volume]] = {"train": [], "validation": [], "test": []}
        if self.source == "synthetic":
            labels = partition(self.n_volumes, self.split_fractions, self.seed)
            seeds = np.random.SeedSequence(self.seed).spawn(self.n_volumes)
            for i, (label, ss) in enumerate(zip(labels, seeds)):
                vol = synth_phantom(self.phantom, np.random.default_rng(ss), name=f"phantom{i:03d}")
                out[label].append(vol)
        else:
            for path, split in read_manifest(self.source):
                out[split].append(load_volume(path))
        return out


@dataclass
class VolumePair:
    hr: np.ndarray  # (S, H, W)
    lr: np.ndarray  # (S, H/r, W/r)
    name: str = ""


def make_pair(volume: Volume, r: int, degradation: str) -> VolumePair:
    # the whole slice is degraded once; patches are cropped afterwards
    return VolumePair(volume.data, degrade(volume.data, r, degradation), volume.name)


@dataclass
class PatchBatch:
    lr: np.ndarray  # (b, ic, p, p)
    hr: np.ndarray  # (b, ic, r p, r p)
    provenance: list[tuple[int, int, int, int]]  # (volume, slice, y, x) in LR coordinates


def extract_patches(
    pairs: list[VolumePair],
    p: int,
    count: int,
    rng: np.random.Generator,
    r: int,
    execution: str = "pure2D",
) -> PatchBatch:
    """Uniformly placed LR crops with their r-times larger HR counterparts.

    In pseudo 3D mode all slices of a volume form the channel axis and the
    recorded slice index is -1.
    """
    if not pairs:
        raise ConfigurationError("no volumes to sample from")
    lh, lw = pairs[0].lr.shape[-2:]
    if p > lh or p > lw:
        raise ConfigurationError(f"patch size {p} exceeds LR slice size {lh}x{lw}")
    lrs, hrs, prov = [], [], []
    for _ in range(count):
        v = int(rng.integers(len(pairs)))
        pair = pairs[v]
        lh, lw = pair.lr.shape[-2:]
        if pseudo := execution == "pseudo3D":
            s = -1
        else:
            s = int(rng.integers(pair.lr.shape[0]))
        y = int(rng.integers(lh - p + 1))
        x = int(rng.integers(lw - p + 1))
        sl = slice(None) if pseudo else slice(s, s + 1)
        lrs.append(pair.lr[sl, y : y + p, x : x + p])
        hrs.append(pair.hr[sl, r * y : r * (y + p), r * x : r * (x + p)])
        prov.append((v, s, y, x))
    return PatchBatch(np.stack(lrs), np.stack(hrs), prov)


def dihedral(x: np.ndarray, k: int) -> np.ndarray:
    """One of the 8 symmetries of the square on the last two axes.

    ``k % 4`` quarter turns, followed by a horizontal flip when ``k >= 4``.
    """
    out = np.rot90(x, k % 4, axes=(-2, -1))
    if k >= 4:
        out = out[..., ::-1]
    return np.ascontiguousarray(out)


def augment(lr: np.ndarray, hr: np.ndarray, rng: np.random.Generator):
    """Apply the same uniformly drawn dihedral transform to both members."""
    if lr.shape[-1] != lr.shape[-2] or hr.shape[-1] != hr.shape[-2]:
        raise ConfigurationError("augmentation needs square patches")
    k = int(rng.integers(8))
    return dihedral(lr, k), dihedral(hr, k)


def augment_batch(batch: PatchBatch, rng: np.random.Generator) -> PatchBatch:
    lrs, hrs = [], []
    for lr, hr in zip(batch.lr, batch.hr):
        a, b = augment(lr, hr, rng)
        lrs.append(a)
        hrs.append(b)
    return PatchBatch(np.stack(lrs), np.stack(hrs), batch.provenance)
