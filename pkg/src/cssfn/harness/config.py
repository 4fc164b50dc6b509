"""Flat ``key = value`` configuration files and the shipped presets."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..data.patches import DatasetSpec
from ..data.volume import PhantomParams
from ..model.config import NetworkConfig
from ..tensor import ConfigurationError

PRESETS = ("tiny", "small", "paper")


@dataclass
class TrainConfig:
    network: NetworkConfig = field(default_factory=NetworkConfig)
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    minibatch: int = 16
    total_iterations: int = 1_000_000
    base_lr: float = 1e-4
    halving_period: int = 200_000
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    patch_size: int = 24
    augment: bool = True
    # > 0: sample this many patches once and train on that fixed pool
    patch_pool: int = 0
    checkpoint_every: int = 0
    validate_every: int = 0
    val_slices: int = 4
    log_every: int = 100

    def __post_init__(self):
        for name in ("minibatch", "total_iterations", "halving_period", "patch_size", "log_every", "val_slices"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("checkpoint_every", "validate_every", "patch_pool"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.base_lr <= 0:
            raise ConfigurationError(f"base_lr must be positive, got {self.base_lr}")
        if self.patch_pool and self.minibatch > self.patch_pool:
            raise ConfigurationError(f"minibatch {self.minibatch} larger than the fixed patch pool {self.patch_pool}")
        if self.network.r != self.dataset.r:
            raise ConfigurationError("network and dataset scale factors differ")
        if self.dataset.execution == "pseudo3D" and self.dataset.source == "synthetic":
            if self.network.ic != self.dataset.phantom.slices:
                raise ConfigurationError(
                    f"pseudo 3D needs ic == slices per volume ({self.network.ic} != {self.dataset.phantom.slices})"
                )
        if self.dataset.execution == "pure2D" and self.network.ic != 1:
            raise ConfigurationError("pure 2D execution needs ic = 1")


def _bool(v: str) -> bool:
    low = v.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _c_o(v: str):
    return None if v.replace(" ", "") == "c/q" else int(v)


def _opt_float(v: str):
    return None if v.lower() in ("none", "") else float(v)


def _fractions(v: str):
    parts = tuple(float(x) for x in v.split(","))
    if len(parts) != 3:
        raise ValueError("split_fractions needs three comma-separated values")
    return parts


# key -> (section, attribute, parser)
KEYS = {
    "c": ("network", "c", int),
    "n": ("network", "n", int),
    "m": ("network", "m", int),
    "q": ("network", "q", int),
    "c_o": ("network", "c_o", _c_o),
    "r": ("both", "r", int),
    "ic": ("network", "ic", int),
    "gff": ("network", "gff", str),
    "bif": ("network", "bif", str),
    "seed": ("both", "seed", int),
    "source": ("dataset", "source", str),
    "degradation": ("dataset", "degradation", str),
    "execution": ("dataset", "execution", str),
    "n_volumes": ("dataset", "n_volumes", int),
    "split_fractions": ("dataset", "split_fractions", _fractions),
    "phantom_slices": ("phantom", "slices", int),
    "phantom_height": ("phantom", "height", int),
    "phantom_width": ("phantom", "width", int),
    "phantom_ellipses": ("phantom", "n_ellipses", int),
    "phantom_ridges": ("phantom", "n_ridges", int),
    "band_limit": ("phantom", "band_limit", _opt_float),
    "minibatch": ("train", "minibatch", int),
    "total_iterations": ("train", "total_iterations", int),
    "base_lr": ("train", "base_lr", float),
    "halving_period": ("train", "halving_period", int),
    "beta1": ("train", "beta1", float),
    "beta2": ("train", "beta2", float),
    "eps": ("train", "eps", float),
    "patch_size": ("train", "patch_size", int),
    "augment": ("train", "augment", _bool),
    "patch_pool": ("train", "patch_pool", int),
    "checkpoint_every": ("train", "checkpoint_every", int),
    "validate_every": ("train", "validate_every", int),
    "val_slices": ("train", "val_slices", int),
    "log_every": ("train", "log_every", int),
}


def parse_config_text(text: str, origin: str = "<config>") -> TrainConfig:
    sections: dict[str, dict] = {"network": {}, "dataset": {}, "phantom": {}, "train": {}}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{origin}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigurationError(f"{origin}:{lineno}: unknown key {key!r}")
        section, attr, parse = KEYS[key]
        try:
            parsed = parse(value)
        except ValueError as exc:
            raise ConfigurationError(f"{origin}:{lineno}: bad value for {key}: {exc}") from None
        if section == "both":
            sections["network"][attr] = parsed
            sections["dataset"][attr] = parsed
        else:
            sections[section][attr] = parsed
    network = NetworkConfig(**sections["network"])
    phantom = PhantomParams(**sections["phantom"])
    dataset = DatasetSpec(phantom=phantom, **sections["dataset"])
    return TrainConfig(network=network, dataset=dataset, **sections["train"])


def dump_config(cfg: TrainConfig) -> str:
    lines = []
    for key, (section, attr, _) in KEYS.items():
        if section in ("network", "both"):
            v = getattr(cfg.network, attr)
        elif section == "dataset":
            v = getattr(cfg.dataset, attr)
        elif section == "phantom":
            v = getattr(cfg.dataset.phantom, attr)
        else:
            v = getattr(cfg, attr)
        if key == "c_o" and v is None:
            v = "c/q"
        elif isinstance(v, tuple):
            v = ",".join(repr(x) for x in v)
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{key} = {v}")
    return "\n".join(lines) + "\n"


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {PRESETS}")
    return resources.files("cssfn.presets").joinpath(f"{name}.cfg").read_text()


def load_config(spec: str) -> TrainConfig:
    """Parse a config file path, or a preset name such as ``tiny``."""
    if spec in PRESETS and not Path(spec).exists():
        return parse_config_text(preset_text(spec), origin=f"preset:{spec}")
    path = Path(spec)
    return parse_config_text(path.read_text(), origin=str(path))


def lr_schedule(iteration: int, cfg: TrainConfig) -> float:
    """Piecewise constant: halve every ``halving_period`` iterations."""
    if iteration < 0:
        raise ValueError("iteration must be >= 0")
    # ldexp is exact and underflows to 0 instead of overflowing 2**k
    return math.ldexp(cfg.base_lr, -(iteration // cfg.halving_period))
