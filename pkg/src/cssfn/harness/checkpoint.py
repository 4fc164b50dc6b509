"""Little-endian binary checkpoints.

Layout: ``b"CSCK"``, u32 format version, then a sequence of records until
EOF.  Each record is ``u8 kind, u32 name length, name (utf-8)`` followed by
a kind-specific body:

* kind 0, tensor: ``u32 ndim, ndim x u64 dims, float64 payload``
* kind 1, text:   ``u64 length, utf-8 bytes``
* kind 2, int:    ``i64``

Records are written in the order: config echo, iteration, parameters
(``param/<name>``), Adam state (``adam/...``), RNG state (``rng/...``),
loss history.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..optim import AdamState

MAGIC = b"CSCK"
VERSION = 1
TENSOR, TEXT, INT = 0, 1, 2


class CheckpointError(IOError):
    pass


@dataclass
class Checkpoint:
    config_text: str
    iteration: int
    params: dict[str, np.ndarray]
    adam: AdamState
    rng_state: dict
    loss_history: list[float] = field(default_factory=list)


def _write_record(f, kind: int, name: str, body: bytes):
    raw = name.encode()
    f.write(struct.pack("<BI", kind, len(raw)))
    f.write(raw)
    f.write(body)


def _tensor_body(arr: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(arr, dtype="<f8")
    head = struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return head + arr.tobytes()


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(MAGIC + struct.pack("<I", VERSION))
        text = ckpt.config_text.encode()
        _write_record(f, TEXT, "config", struct.pack("<Q", len(text)) + text)
        _write_record(f, INT, "iteration", struct.pack("<q", ckpt.iteration))
        for name, arr in ckpt.params.items():
            _write_record(f, TENSOR, f"param/{name}", _tensor_body(arr))
        a = ckpt.adam
        _write_record(f, INT, "adam/t", struct.pack("<q", a.t))
        _write_record(f, TENSOR, "adam/hyper", _tensor_body(np.array([a.beta1, a.beta2, a.eps])))
        for name in ckpt.params:
            if name in a.m:
                _write_record(f, TENSOR, f"adam/m/{name}", _tensor_body(a.m[name]))
                _write_record(f, TENSOR, f"adam/v/{name}", _tensor_body(a.v[name]))
        rng = json.dumps(ckpt.rng_state, sort_keys=True).encode()
        _write_record(f, TEXT, "rng/data", struct.pack("<Q", len(rng)) + rng)
        _write_record(f, TENSOR, "history/loss", _tensor_body(np.asarray(ckpt.loss_history, dtype=np.float64)))
    tmp.replace(path)


class _Reader:
    def __init__(self, blob: bytes, path):
        self.blob, self.pos, self.path = blob, 0, path

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.blob):
            raise CheckpointError(f"{self.path}: truncated at byte {self.pos}")
        out = struct.unpack_from(fmt, self.blob, self.pos)
        self.pos += size
        return out

    def raw(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise CheckpointError(f"{self.path}: truncated at byte {self.pos}")
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    blob = path.read_bytes()
    if blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {blob[:4]!r}, expected {MAGIC!r}")
    rd = _Reader(blob, path)
    rd.pos = 4
    (version,) = rd.take("<I")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")

    texts, ints, tensors = {}, {}, {}
    while rd.pos < len(blob):
        kind, nlen = rd.take("<BI")
        name = rd.raw(nlen).decode()
        if kind == TENSOR:
            (ndim,) = rd.take("<I")
            shape = rd.take(f"<{ndim}Q") if ndim else ()
            count = int(np.prod(shape)) if ndim else 1
            payload = rd.raw(8 * count)
            tensors[name] = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(shape)
        elif kind == TEXT:
            (n,) = rd.take("<Q")
            texts[name] = rd.raw(n).decode()
        elif kind == INT:
            (ints[name],) = rd.take("<q")
        else:
            raise CheckpointError(f"{path}: unknown record kind {kind} for {name!r}")

    try:
        params = {k[len("param/") :]: v for k, v in tensors.items() if k.startswith("param/")}
        b1, b2, eps = tensors["adam/hyper"]
        adam = AdamState(float(b1), float(b2), float(eps), ints["adam/t"])
        for k, v in tensors.items():
            if k.startswith("adam/m/"):
                adam.m[k[len("adam/m/") :]] = v
            elif k.startswith("adam/v/"):
                adam.v[k[len("adam/v/") :]] = v
        return Checkpoint(
            texts["config"],
            ints["iteration"],
            params,
            adam,
            json.loads(texts["rng/data"]),
            tensors["history/loss"].tolist(),
        )
    except KeyError as exc:
        raise CheckpointError(f"{path}: missing record {exc}") from None
