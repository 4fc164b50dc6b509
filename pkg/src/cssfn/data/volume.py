"""MR volumes: container, raw file format, manifests and synthetic phantoms."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"CSSF"
HEADER = struct.Struct("<4sIII")


class VolumeFormatError(IOError):
    pass


@dataclass
class Volume:
    """(slices, height, width) intensities scaled to [0, 1].

    ``max_value`` is the original maximum that was divided out.
    """

    data: np.ndarray
    max_value: float = 1.0
    name: str = ""

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3:
            raise ValueError(f"volume data must be (S, H, W), got shape {self.data.shape}")
        if not self.max_value > 0:
            raise ValueError(f"max_value must be positive, got {self.max_value}")

    @classmethod
    def from_raw(cls, raw, name: str = "") -> "Volume":
        raw = np.asarray(raw, dtype=np.float64)
        if np.any(raw < 0):
            raise ValueError("raw intensities must be nonnegative")
        peak = float(raw.max())
        if peak <= 0:
            raise ValueError("cannot normalise an all-zero volume")
        return cls(raw / peak, peak, name)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def denormalized(self) -> np.ndarray:
        return self.data * self.max_value


def save_volume(volume: Volume, path) -> None:
    s, h, w = volume.shape
    with open(path, "wb") as f:
        f.write(HEADER.pack(MAGIC, s, h, w))
        f.write(np.ascontiguousarray(volume.data, dtype="<f8").tobytes())
        f.write(struct.pack("<d", volume.max_value))


def load_volume(path) -> Volume:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < HEADER.size:
        raise VolumeFormatError(f"{path}: file too short for the {HEADER.size}-byte header")
    magic, s, h, w = HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise VolumeFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    expected = HEADER.size + 8 * s * h * w + 8
    if len(blob) < expected:
        raise VolumeFormatError(f"{path}: truncated payload ({len(blob)} bytes, need {expected} for {s}x{h}x{w})")
    if len(blob) > expected:
        raise VolumeFormatError(f"{path}: {len(blob) - expected} trailing bytes; header dims {s}x{h}x{w} mismatch")
    data = np.frombuffer(blob, dtype="<f8", count=s * h * w, offset=HEADER.size).reshape(s, h, w)
    (peak,) = struct.unpack_from("<d", blob, expected - 8)
    try:
        return Volume(data.astype(np.float64), peak, path.stem)
    except ValueError as exc:
        raise VolumeFormatError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# manifest: "<path> <split>" per line


SPLITS = ("train", "validation", "test")


def read_manifest(path) -> list[tuple[Path, str]]:
    path = Path(path)
    records = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.rsplit(None, 1)
        if len(parts) != 2 or parts[1] not in SPLITS:
            raise VolumeFormatError(f"{path}:{lineno}: expected '<path> <split>' with split in {SPLITS}")
        p = Path(parts[0])
        records.append((p if p.is_absolute() else path.parent / p, parts[1]))
    return records


def write_manifest(records, path) -> None:
    with open(path, "w") as f:
        for p, split in records:
            f.write(f"{p} {split}\n")


def partition(count: int, fractions=(0.8, 0.1, 0.1), seed: int = 0) -> list[str]:
    """Assign ``count`` items to train/validation/test, deterministically."""
    fractions = np.asarray(fractions, dtype=np.float64)
    sizes = np.floor(fractions / fractions.sum() * count).astype(int)
    # every requested split gets at least one item while supply lasts
    for i in np.argsort(-fractions, kind="stable"):
        if fractions[i] > 0 and sizes[i] == 0 and sizes.sum() < count:
            sizes[i] = 1
    sizes[0] += count - sizes.sum()
    labels = np.repeat(np.array(SPLITS), sizes)
    order = np.random.default_rng(seed).permutation(count)
    out = [""] * count
    for slot, idx in enumerate(order):
        out[idx] = str(labels[slot])
    return out


# ---------------------------------------------------------------------------
# synthetic phantoms


@dataclass
class PhantomParams:
    slices: int = 96
    height: int = 240
    width: int = 240
    n_ellipses: int = 10
    n_ridges: int = 4
    # smooth-field correlation length as a fraction of the in-plane size
    smoothness: float = 0.08
    # in-plane band limit as a fraction of Nyquist; None keeps sharp edges
    band_limit: float | None = None

    def __post_init__(self):
        for name in ("height", "width"):
            if getattr(self, name) % 12:
                raise ValueError(f"phantom {name} must be a multiple of 12, got {getattr(self, name)}")
        if self.slices < 1:
            raise ValueError("phantom needs at least one slice")
        if self.band_limit is not None and not 0 < self.band_limit <= 1:
            raise ValueError(f"band_limit must lie in (0, 1], got {self.band_limit}")


def band_limit_mask(h: int, w: int, band_limit: float) -> np.ndarray:
    fy = np.abs(np.fft.fftfreq(h) * h)[:, None]
    fx = np.abs(np.fft.fftfreq(w) * w)[None, :]
    return (fy < band_limit * h / 2) & (fx < band_limit * w / 2)


def _smooth_field(shape, corr, rng):
    noise = rng.standard_normal(shape)
    s, h, w = shape
    ks = np.fft.fftfreq(s)[:, None, None]
    ky = np.fft.fftfreq(h)[None, :, None]
    kx = np.fft.fftfreq(w)[None, None, :]
    gain = np.exp(-0.5 * ((ky**2 + kx**2) + ks**2) * (2 * np.pi * corr * max(h, w)) ** 2)
    f = np.fft.ifftn(np.fft.fftn(noise) * gain).real
    f -= f.mean()
    return f / (np.abs(f).max() + 1e-300)


def synth_phantom(params: PhantomParams | None = None, rng: np.random.Generator | None = None, name: str = "") -> Volume:
    """Head-like volume: smooth tissue field, ellipsoids and curved ridges."""
    params = params or PhantomParams()
    rng = rng if rng is not None else np.random.default_rng(0)
    s, h, w = params.slices, params.height, params.width
    zz = np.linspace(-1.0, 1.0, s)[:, None, None] if s > 1 else np.zeros((1, 1, 1))
    yy = np.linspace(-1.0, 1.0, h)[None, :, None]
    xx = np.linspace(-1.0, 1.0, w)[None, None, :]

    head = ((yy / 0.85) ** 2 + (xx / 0.7) ** 2 + (zz / 1.3) ** 2) <= 1.0
    vol = head * (0.55 + 0.25 * _smooth_field((s, h, w), params.smoothness, rng))

    for _ in range(params.n_ellipses):
        cy, cx = rng.uniform(-0.5, 0.5, 2)
        cz = rng.uniform(-0.8, 0.8)
        ay, ax = rng.uniform(0.05, 0.3, 2)
        az = rng.uniform(0.3, 1.2)
        theta = rng.uniform(0, np.pi)
        ct, st = np.cos(theta), np.sin(theta)
        u = (yy - cy) * ct + (xx - cx) * st
        v = -(yy - cy) * st + (xx - cx) * ct
        inside = (u / ay) ** 2 + (v / ax) ** 2 + ((zz - cz) / az) ** 2 <= 1.0
        vol = vol + rng.uniform(-0.25, 0.35) * inside

    for _ in range(params.n_ridges):
        a, b = rng.uniform(-0.4, 0.4, 2)
        amp, freq, phase = rng.uniform(0.05, 0.2), rng.uniform(2, 6), rng.uniform(0, 2 * np.pi)
        width = rng.uniform(0.01, 0.03)
        d = yy - (a + b * xx + amp * np.sin(freq * xx + phase + 0.5 * zz))
        vol = vol + rng.uniform(0.1, 0.3) * np.exp(-0.5 * (d / width) ** 2) * head

    if params.band_limit is not None:
        mask = band_limit_mask(h, w, params.band_limit)
        vol = np.fft.ifft2(np.fft.fft2(vol) * mask).real

    lo, hi = vol.min(), vol.max()
    vol = (vol - lo) / (hi - lo)
    # affine rescale keeps the spectral support; clip only removes rounding
    np.clip(vol, 0.0, 1.0, out=vol)
    return Volume(vol, 1.0, name)
