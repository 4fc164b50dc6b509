"""Parameter initialisation and the Adam optimiser."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def fans(shape) -> tuple[int, int]:
    """Fan-in / fan-out of a conv weight (Cout, Cin, kh, kw) or a matrix."""
    shape = tuple(shape)
    if len(shape) < 2:
        raise ValueError(f"cannot compute fans for shape {shape}")
    receptive = int(np.prod(shape[2:])) if len(shape) > 2 else 1
    return shape[1] * receptive, shape[0] * receptive


def xavier_bound(shape) -> float:
    fan_in, fan_out = fans(shape)
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def xavier_init(shape, rng: np.random.Generator) -> np.ndarray:
    """Glorot uniform samples on +-sqrt(6 / (fan_in + fan_out))."""
    bound = xavier_bound(shape)
    return rng.uniform(-bound, bound, size=tuple(shape))


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState, lr: float) -> AdamState:
    """Bias-corrected Adam update, applied in place to ``params``.

    ``params`` maps names to arrays (or objects with a ``.data`` array);
    ``grads`` maps the same names to gradient arrays.  Missing gradients
    count as zero.
    """
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for name, p in params.items():
        arr = p.data if hasattr(p, "data") and not isinstance(p, np.ndarray) else p
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(arr)
        if g.shape != arr.shape:
            raise ValueError(f"gradient for {name!r} has shape {g.shape}, parameter has {arr.shape}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(arr)
            state.v[name] = np.zeros_like(arr)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        arr -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state
