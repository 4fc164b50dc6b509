from __future__ import annotations

from functools import lru_cache
from typing import Mapping

import numpy as np

from ..optim import xavier_init
from ..tensor import ConfigurationError, ConvParams, Tensor, parameter
from . import wiring
from .config import NetworkConfig
from .wiring import EagerOps, LayerSpec, Sym, TraceOps


class NetworkStateError(RuntimeError):
    pass


class Trace:
    """Result of a symbolic pass: layer table and the output's conv depth."""

    def __init__(self, layers: dict[str, LayerSpec], output: Sym):
        self.layers = layers
        self.output = output

    @property
    def depth(self) -> int:
        return self.output.depth


@lru_cache(maxsize=256)
def trace_network(config: NetworkConfig) -> Trace:
    ops = TraceOps()
    out = wiring.network(ops, Sym(config.ic, 0), config)
    if out.channels != config.ic:
        raise ConfigurationError(f"network maps to {out.channels} channels, expected ic={config.ic}")
    return Trace(dict(ops.layers), out)


class Network:
    """CSSFN parameter store plus eager forward / backward."""

    def __init__(self, config: NetworkConfig, layers: dict[str, ConvParams]):
        self.config = config
        self.layers = layers
        trace = trace_network(config)
        if list(trace.layers) != list(layers):
            raise ConfigurationError("layer set does not match the configured wiring")
        for name, spec in trace.layers.items():
            if layers[name].weight.data.shape != spec.weight_shape:
                raise ConfigurationError(
                    f"layer {name!r} has weight {layers[name].weight.data.shape}, expected {spec.weight_shape}"
                )
        self._output: Tensor | None = None

    # parameters ---------------------------------------------------------

    def parameters(self) -> dict[str, Tensor]:
        out = {}
        for name, p in self.layers.items():
            out[f"{name}.weight"] = p.weight
            out[f"{name}.bias"] = p.bias
        return out

    def num_parameters(self, include_bias: bool = True) -> int:
        total = 0
        for p in self.layers.values():
            total += p.weight.data.size
            if include_bias:
                total += p.bias.data.size
        return total

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.parameters().items()}

    def load_state_dict(self, state: Mapping[str, np.ndarray]):
        params = self.parameters()
        missing = set(params) - set(state)
        extra = set(state) - set(params)
        if missing or extra:
            raise ConfigurationError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for k, p in params.items():
            arr = np.asarray(state[k], dtype=np.float64)
            if arr.shape != p.data.shape:
                raise ConfigurationError(f"{k}: shape {arr.shape} != {p.data.shape}")
            p.data[...] = arr

    def zero_grad(self):
        for p in self.parameters().values():
            p.grad = None

    # structure ----------------------------------------------------------

    def layer_specs(self) -> list[LayerSpec]:
        return [
            LayerSpec(name, p.in_channels, p.out_channels, p.kernel_size) for name, p in self.layers.items()
        ]

    def longest_conv_path(self) -> int:
        """Conv layers on the longest input-to-output path, measured on the wiring."""
        return trace_network(self.config).depth

    # computation --------------------------------------------------------

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 4 or x.shape[1] != self.config.ic:
            raise ConfigurationError(f"expected input (n, {self.config.ic}, h, w), got {x.shape}")
        if min(x.shape[2:]) < 3:
            raise ConfigurationError(f"spatial size {x.shape[2:]} smaller than the 3x3 kernel reach")
        out = wiring.network(EagerOps(self.layers), Tensor(x), self.config)
        self._output = out
        return out.data

    __call__ = forward

    def backward(self, grad_out: np.ndarray) -> dict[str, np.ndarray]:
        """Gradients of every parameter given d(loss)/d(output)."""
        if self._output is None:
            raise NetworkStateError("backward called before forward")
        self.zero_grad()
        self._output.backward(grad_out)
        return {
            k: (p.grad if p.grad is not None else np.zeros_like(p.data)) for k, p in self.parameters().items()
        }

    def release(self):
        """Drop cached activations."""
        self._output = None


def build_network(config: NetworkConfig, rng: np.random.Generator | None = None, init: str = "xavier") -> Network:
    """Allocate every layer the wiring declares.

    ``init="xavier"`` draws weights from ``rng`` (default: seeded by
    ``config.seed``) in wiring order; ``init="zeros"`` gives the all-zero
    network.  Biases start at zero either way.
    """
    if init not in ("xavier", "zeros"):
        raise ConfigurationError(f"unknown init {init!r}")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    layers = {}
    for name, spec in trace_network(config).layers.items():
        if init == "xavier":
            w = xavier_init(spec.weight_shape, rng)
        else:
            w = np.zeros(spec.weight_shape)
        layers[name] = ConvParams(parameter(w), parameter(np.zeros(spec.out_channels)))
    return Network(config, layers)


# ---------------------------------------------------------------------------
# unit-level entry points


def cssfu_forward(x: Tensor, params: Mapping[str, ConvParams], q: int, c_o: int | None = None) -> Tensor:
    """Serial-fusion unit; ``params`` keys are ``fuse1..fuse{q}`` and ``extend``."""
    c = x.channels
    if c % q:
        raise ConfigurationError(f"q={q} must divide C={c}")
    return wiring.serial_fusion_unit(_Prefixed(params), "", x, c, q, c_o or c // q)


def plain_unit_forward(x: Tensor, params: Mapping[str, ConvParams]) -> Tensor:
    """Conv + ReLU + conv; keys ``conv1``, ``conv2``."""
    return wiring.plain_unit(_Prefixed(params), "", x, x.channels)


def mar_unit_forward(x: Tensor, params: Mapping[str, ConvParams], q: int) -> Tensor:
    """Merge-and-run unit; keys ``stage{s}.branch{k}``."""
    return wiring.merge_and_run_unit(_Prefixed(params), "", x, x.channels, q)


def cssfb_forward(inputs, params: Mapping[str, ConvParams], config: NetworkConfig) -> Tensor:
    """One building block; ``inputs`` is the list of concatenated sources."""
    if isinstance(inputs, Tensor):
        inputs = [inputs]
    return wiring.building_block(_Prefixed(params), "", list(inputs), config)


class _Prefixed(EagerOps):
    # wiring names carry a leading "." when called with an empty prefix
    def conv(self, name, x, out_channels, kernel):
        return super().conv(name.lstrip("."), x, out_channels, kernel)


def unit_layer_specs(config: NetworkConfig, in_channels: int | None = None) -> dict[str, LayerSpec]:
    """Layer table of a single unit (or block when ``in_channels`` is given)."""
    ops = TraceOps()
    if in_channels is None:
        wiring.unit(ops, "", Sym(config.c), config)
    else:
        wiring.building_block(ops, "", [Sym(in_channels)], config)
    return {k.lstrip("."): LayerSpec(k.lstrip("."), v.in_channels, v.out_channels, v.kernel) for k, v in ops.layers.items()}


def init_layers(specs: Mapping[str, LayerSpec], rng: np.random.Generator) -> dict[str, ConvParams]:
    return {
        name: ConvParams(parameter(xavier_init(s.weight_shape, rng)), parameter(np.zeros(s.out_channels)))
        for name, s in specs.items()
    }
