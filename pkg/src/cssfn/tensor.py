"""Minimal reverse-mode tensor engine for NCHW float64 feature maps.

Each primitive comes in two layers: a pure numpy ``*_forward`` /
``*_backward`` pair, and a :class:`Tensor`-level op that records the
backward closure on a tape.  ``Tensor.backward`` replays the tape in
reverse topological order.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np


class ConfigurationError(ValueError):
    """Raised when shapes or hyperparameters are inconsistent."""


class Tensor:
    """Rank-4 (n, C, H, W) float64 array with an optional gradient slot."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        _parents: tuple["Tensor", ...] = (),
        _backward: Callable[[np.ndarray], None] | None = None,
    ):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 4:
            raise ConfigurationError(f"Tensor must be rank 4 (n, C, H, W), got shape {data.shape}")
        self.data = data
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.data.shape

    @property
    def channels(self) -> int:
        return self.data.shape[1]

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def backward(self, grad: np.ndarray | None = None):
        """Backpropagate ``grad`` (defaults to ones) through the recorded graph."""
        if grad is None:
            grad = np.ones_like(self.data)
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape != self.data.shape:
            raise ConfigurationError(f"grad shape {grad.shape} does not match tensor shape {self.data.shape}")

        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))

        # interior gradients are per-call; leaf gradients accumulate
        for node in order:
            if node._backward is not None:
                node.grad = None
        self._accumulate(grad)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def _result(data: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    req = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=req, _parents=tuple(parents) if req else (), _backward=backward if req else None)


# ---------------------------------------------------------------------------
# convolution


@dataclass
class ConvParams:
    """Weight (Cout, Cin, k, k) and bias (Cout,) of one stride-1 same-padded conv."""

    weight: Tensor
    bias: Tensor

    def __post_init__(self):
        w = self.weight.data
        kh, kw = w.shape[2:]
        if kh != kw or kh not in (1, 3):
            raise ConfigurationError(f"kernel must be 1x1 or 3x3, got {kh}x{kw}")
        if self.bias.data.size != w.shape[0]:
            raise ConfigurationError(f"bias has {self.bias.data.size} entries, weight has {w.shape[0]} outputs")

    @classmethod
    def from_arrays(cls, weight, bias, requires_grad: bool = True) -> "ConvParams":
        return cls(parameter(weight, requires_grad), parameter(bias, requires_grad))

    @property
    def in_channels(self) -> int:
        return self.weight.data.shape[1]

    @property
    def out_channels(self) -> int:
        return self.weight.data.shape[0]

    @property
    def kernel_size(self) -> int:
        return self.weight.data.shape[2]


class _ParamTensor(Tensor):
    """Parameter leaf; unlike activations it may have any rank."""

    __slots__ = ()

    def __init__(self, data, requires_grad: bool = True):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None


def parameter(data, requires_grad: bool = True) -> Tensor:
    """Wrap an array of any rank as a trainable leaf tensor."""
    return _ParamTensor(data, requires_grad)


def _check_conv(x: np.ndarray, w: np.ndarray, b: np.ndarray | None = None):
    if x.ndim != 4:
        raise ConfigurationError(f"conv input must be rank 4, got {x.shape}")
    if w.ndim != 4 or w.shape[2] != w.shape[3] or w.shape[2] % 2 != 1:
        raise ConfigurationError(f"conv weight must be (Cout, Cin, k, k) with odd k, got {w.shape}")
    if x.shape[1] != w.shape[1]:
        raise ConfigurationError(f"input has {x.shape[1]} channels but the layer expects Cin={w.shape[1]}")
    if b is not None and b.shape != (w.shape[0],):
        raise ConfigurationError(f"bias shape {b.shape} inconsistent with Cout={w.shape[0]}")


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """(C*k*k, N*H*W) matrix of zero-padded neighbourhoods."""
    n, c, h, w = x.shape
    xt = x.transpose(1, 0, 2, 3)
    if k == 1:
        return xt.reshape(c, n * h * w)
    p = k // 2
    xp = np.zeros((c, n, h + 2 * p, w + 2 * p))
    xp[:, :, p : p + h, p : p + w] = xt
    cols = np.empty((c, k, k, n, h, w))
    for dy in range(k):
        for dx in range(k):
            cols[:, dy, dx] = xp[:, :, dy : dy + h, dx : dx + w]
    return cols.reshape(c * k * k, n * h * w)


def _col2im(cols: np.ndarray, shape, k: int) -> np.ndarray:
    """Adjoint of :func:`_im2col`: scatter-add neighbourhoods back to NCHW."""
    n, c, h, w = shape
    if k == 1:
        return np.ascontiguousarray(cols.reshape(c, n, h, w).transpose(1, 0, 2, 3))
    p = k // 2
    cols = cols.reshape(c, k, k, n, h, w)
    xp = np.zeros((c, n, h + 2 * p, w + 2 * p))
    for dy in range(k):
        for dx in range(k):
            xp[:, :, dy : dy + h, dx : dx + w] += cols[:, dy, dx]
    return np.ascontiguousarray(xp[:, :, p : p + h, p : p + w].transpose(1, 0, 2, 3))


def conv2d_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Stride-1 cross-correlation with zero 'same' padding."""
    _check_conv(x, weight, bias)
    n, _, h, w = x.shape
    cout, k = weight.shape[0], weight.shape[2]
    out = weight.reshape(cout, -1) @ _im2col(x, k)
    out += bias[:, None]
    return np.ascontiguousarray(out.reshape(cout, n, h, w).transpose(1, 0, 2, 3))


def conv2d_backward(x: np.ndarray, weight: np.ndarray, grad_out: np.ndarray, need_input_grad: bool = True):
    """Return ``(grad_input, grad_weight, grad_bias)`` for :func:`conv2d_forward`."""
    _check_conv(x, weight)
    n, _, h, w = x.shape
    cout, k = weight.shape[0], weight.shape[2]
    if grad_out.shape != (n, cout, h, w):
        raise ConfigurationError(f"grad_out shape {grad_out.shape} != forward output {(n, cout, h, w)}")
    g = grad_out.transpose(1, 0, 2, 3).reshape(cout, n * h * w)
    grad_bias = g.sum(axis=1)
    grad_weight = (g @ _im2col(x, k).T).reshape(weight.shape)
    grad_input = None
    if need_input_grad:
        grad_input = _col2im(weight.reshape(cout, -1).T @ g, x.shape, k)
    return grad_input, grad_weight, grad_bias


def conv2d(x: Tensor, params: ConvParams) -> Tensor:
    w, b = params.weight, params.bias
    out = conv2d_forward(x.data, w.data, b.data)

    def backward(g):
        gx, gw, gb = conv2d_backward(x.data, w.data, g, need_input_grad=x.requires_grad)
        if x.requires_grad:
            x._accumulate(gx)
        if w.requires_grad:
            w._accumulate(gw)
        if b.requires_grad:
            b._accumulate(gb)

    return _result(out, (x, w, b), backward)


# ---------------------------------------------------------------------------
# pointwise and structural ops


def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    # gradient at exactly 0 is 0
    return np.where(x > 0, grad_out, 0.0)


def relu(x: Tensor) -> Tensor:
    def backward(g):
        x._accumulate(relu_backward(x.data, g))

    return _result(relu_forward(x.data), (x,), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ConfigurationError(f"cannot add tensors of shapes {a.shape} and {b.shape}")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(g)

    return _result(a.data + b.data, (a, b), backward)


def mean(parts: Sequence[Tensor]) -> Tensor:
    """Elementwise average of equally shaped tensors."""
    parts = list(parts)
    shapes = {p.shape for p in parts}
    if len(shapes) != 1:
        raise ConfigurationError(f"mean needs identical shapes, got {sorted(shapes)}")
    k = len(parts)
    out = parts[0].data.copy()
    for p in parts[1:]:
        out += p.data
    out /= k

    def backward(g):
        share = g / k
        for p in parts:
            if p.requires_grad:
                p._accumulate(share)

    return _result(out, parts, backward)


def concat_channels(parts: Sequence[Tensor]) -> Tensor:
    parts = list(parts)
    if not parts:
        raise ConfigurationError("concat_channels needs at least one tensor")
    ref = parts[0].shape
    for p in parts[1:]:
        if (p.shape[0], p.shape[2], p.shape[3]) != (ref[0], ref[2], ref[3]):
            raise ConfigurationError(f"concat_channels: shape {p.shape} incompatible with {ref}")
    if len(parts) == 1:
        return parts[0]
    widths = [p.channels for p in parts]
    bounds = np.cumsum([0] + widths)

    def backward(g):
        for p, lo, hi in zip(parts, bounds[:-1], bounds[1:]):
            if p.requires_grad:
                p._accumulate(g[:, lo:hi])

    return _result(np.concatenate([p.data for p in parts], axis=1), parts, backward)


def narrow_channels(x: Tensor, start: int, stop: int) -> Tensor:
    """Channels ``[start, stop)`` of ``x`` as a new tensor."""
    if not 0 <= start < stop <= x.channels:
        raise ConfigurationError(f"channel range [{start}, {stop}) outside 0..{x.channels}")

    def backward(g):
        full = np.zeros_like(x.data)
        full[:, start:stop] = g
        x._accumulate(full)

    return _result(np.ascontiguousarray(x.data[:, start:stop]), (x,), backward)


def split_channels(x: Tensor, q: int) -> list[Tensor]:
    """Split into ``q`` equal contiguous channel groups."""
    c = x.channels
    if q < 1 or c % q:
        raise ConfigurationError(f"cannot split C={c} channels into q={q} equal parts")
    if q == 1:
        return [x]
    w = c // q
    return [narrow_channels(x, i * w, (i + 1) * w) for i in range(q)]


def split_widths(x: Tensor, widths: Iterable[int]) -> list[Tensor]:
    widths = list(widths)
    if sum(widths) != x.channels:
        raise ConfigurationError(f"widths {widths} do not sum to C={x.channels}")
    out, lo = [], 0
    for w in widths:
        out.append(narrow_channels(x, lo, lo + w))
        lo += w
    return out


def pixel_shuffle_forward(x: np.ndarray, r: int) -> np.ndarray:
    n, c, h, w = x.shape
    if r < 1 or c % (r * r):
        raise ConfigurationError(f"pixel_shuffle: r^2={r * r} does not divide C={c}")
    out = x.reshape(n, c // (r * r), r, r, h, w).transpose(0, 1, 4, 2, 5, 3)
    return np.ascontiguousarray(out.reshape(n, c // (r * r), h * r, w * r))


def pixel_unshuffle_forward(x: np.ndarray, r: int) -> np.ndarray:
    """Inverse of :func:`pixel_shuffle_forward`."""
    n, c, H, W = x.shape
    if H % r or W % r:
        raise ConfigurationError(f"pixel_unshuffle: r={r} does not divide {H}x{W}")
    h, w = H // r, W // r
    out = x.reshape(n, c, h, r, w, r).transpose(0, 1, 3, 5, 2, 4)
    return np.ascontiguousarray(out.reshape(n, c * r * r, h, w))


def pixel_shuffle(x: Tensor, r: int) -> Tensor:
    out = pixel_shuffle_forward(x.data, r)

    def backward(g):
        x._accumulate(pixel_unshuffle_forward(g, r))

    return _result(out, (x,), backward)


# ---------------------------------------------------------------------------
# loss


def l1_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean absolute error over all elements."""
    pred, target = np.asarray(pred, dtype=np.float64), np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ConfigurationError(f"l1_loss shape mismatch: {pred.shape} vs {target.shape}")
    return float(np.abs(pred - target).mean())


def l1_loss_backward(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    pred, target = np.asarray(pred, dtype=np.float64), np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ConfigurationError(f"l1_loss shape mismatch: {pred.shape} vs {target.shape}")
    return np.sign(pred - target) / pred.size
