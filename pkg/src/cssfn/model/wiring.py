"""Network wiring written once against a small ``ops`` interface.

The same functions run eagerly on :class:`~cssfn.tensor.Tensor` values
(:class:`EagerOps`) or symbolically (:class:`TraceOps`), which derives the
layer table and the longest conv path without allocating any weights.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .. import tensor as T
from ..resize import upscale
from ..tensor import ConfigurationError, ConvParams, Tensor
from .config import NetworkConfig


class EagerOps:
    def __init__(self, params: Mapping[str, ConvParams]):
        self.params = params

    def conv(self, name, x, out_channels, kernel):
        p = self.params[name]
        if p.out_channels != out_channels or p.kernel_size != kernel:
            raise ConfigurationError(
                f"layer {name!r} is {p.kernel_size}x{p.kernel_size}->{p.out_channels}, "
                f"wiring expects {kernel}x{kernel}->{out_channels}"
            )
        return T.conv2d(x, p)

    relu = staticmethod(T.relu)
    add = staticmethod(T.add)
    concat = staticmethod(T.concat_channels)
    split = staticmethod(T.split_channels)
    mean = staticmethod(T.mean)
    shuffle = staticmethod(T.pixel_shuffle)

    @staticmethod
    def upsample(x: Tensor, r: int) -> Tensor:
        # constant branch: excluded from differentiation
        return Tensor(upscale(x.data, r))


@dataclass(frozen=True)
class Sym:
    """Symbolic activation: channel count and conv depth from the input."""

    channels: int
    depth: int = 0


@dataclass(frozen=True)
class LayerSpec:
    name: str
    in_channels: int
    out_channels: int
    kernel: int

    @property
    def weight_shape(self) -> tuple[int, int, int, int]:
        return (self.out_channels, self.in_channels, self.kernel, self.kernel)

    @property
    def n_weights(self) -> int:
        return int(np.prod(self.weight_shape))


@dataclass
class TraceOps:
    layers: dict[str, LayerSpec] = field(default_factory=dict)

    def conv(self, name, x: Sym, out_channels, kernel):
        if name in self.layers:
            raise ConfigurationError(f"layer name {name!r} wired twice")
        self.layers[name] = LayerSpec(name, x.channels, out_channels, kernel)
        return Sym(out_channels, x.depth + 1)

    def relu(self, x):
        return x

    def add(self, a: Sym, b: Sym):
        if a.channels != b.channels:
            raise ConfigurationError(f"cannot add {a.channels} and {b.channels} channels")
        return Sym(a.channels, max(a.depth, b.depth))

    def concat(self, parts):
        return Sym(sum(p.channels for p in parts), max(p.depth for p in parts))

    def split(self, x: Sym, q):
        if x.channels % q:
            raise ConfigurationError(f"cannot split C={x.channels} channels into q={q} equal parts")
        return [Sym(x.channels // q, x.depth)] * q

    def mean(self, parts):
        if len({p.channels for p in parts}) != 1:
            raise ConfigurationError("mean over branches of different widths")
        return Sym(parts[0].channels, max(p.depth for p in parts))

    def shuffle(self, x: Sym, r):
        if x.channels % (r * r):
            raise ConfigurationError(f"pixel_shuffle: r^2={r * r} does not divide C={x.channels}")
        return Sym(x.channels // (r * r), x.depth)

    def upsample(self, x: Sym, r):
        return x


# ---------------------------------------------------------------------------
# wiring


def shallow_extraction(ops, x, cfg: NetworkConfig):
    h = ops.conv("shallow.conv1", x, cfg.c, 3)
    h = ops.conv("shallow.conv2", h, cfg.c, 1)
    return ops.conv("shallow.conv3", h, cfg.c, 3)


def serial_fusion_unit(ops, prefix: str, x, c: int, q: int, c_o: int):
    parts = ops.split(x, q)
    # z^0 = 0 contributes nothing, so the first conv sees x^0 alone
    z = ops.relu(ops.conv(f"{prefix}.fuse1", parts[0], c_o, 3))
    for k in range(2, q + 1):
        z = ops.relu(ops.conv(f"{prefix}.fuse{k}", ops.concat([parts[k - 1], z]), c_o, 3))
    return ops.conv(f"{prefix}.extend", z, c, 3)


def plain_unit(ops, prefix: str, x, c: int):
    h = ops.relu(ops.conv(f"{prefix}.conv1", x, c, 3))
    return ops.conv(f"{prefix}.conv2", h, c, 3)


MAR_STAGES = 2


def merge_and_run_unit(ops, prefix: str, x, c: int, q: int):
    branches = ops.split(x, q)
    width = c // q
    for s in range(1, MAR_STAGES + 1):
        avg = ops.mean(branches)
        branches = [
            ops.add(ops.relu(ops.conv(f"{prefix}.stage{s}.branch{k}", b, width, 3)), avg)
            for k, b in enumerate(branches, start=1)
        ]
    return ops.concat(branches)


def unit(ops, prefix: str, x, cfg: NetworkConfig):
    if cfg.bif == "SF":
        return serial_fusion_unit(ops, prefix, x, cfg.c, cfg.q, cfg.fusion_width)
    if cfg.bif == "MAR":
        return merge_and_run_unit(ops, prefix, x, cfg.c, cfg.q)
    return plain_unit(ops, prefix, x, cfg.c)


def building_block(ops, prefix: str, inputs: list, cfg: NetworkConfig):
    compressed = ops.conv(f"{prefix}.compress", ops.concat(inputs), cfg.c, 1)
    h = compressed
    for j in range(1, cfg.m + 1):
        h = unit(ops, f"{prefix}.unit{j}", h, cfg)
    return ops.add(compressed, h)


def network(ops, x, cfg: NetworkConfig):
    x0 = shallow_extraction(ops, x, cfg)
    feats = [x0]
    for i in range(1, cfg.n + 1):
        # dense fusion feeds [x_{i-1}, ..., x_0]; otherwise blocks chain
        inputs = feats[::-1] if cfg.gff == "DGFF" else [feats[-1]]
        feats.append(building_block(ops, f"block{i}", inputs, cfg))
    fused = feats[::-1] if cfg.gff != "none" else [feats[-1]]
    h = ops.conv("fusion.conv1x1", ops.concat(fused), cfg.c, 1)
    h = ops.conv("fusion.conv3x3", h, cfg.c, 3)
    h = ops.add(x0, h)
    for t, f in enumerate(cfg.upscale_factors, start=1):
        h = ops.shuffle(ops.conv(f"upscale.conv{t}", h, cfg.c * f * f, 3), f)
    y = ops.conv("recon.conv", h, cfg.ic, 3)
    return ops.add(y, ops.upsample(x, cfg.r))
