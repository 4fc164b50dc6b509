from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

from ..tensor import ConfigurationError

GFF_MODES = ("none", "CGFF", "DGFF")
BIF_MODES = ("plain", "MAR", "SF")
SCALES = (2, 3, 4)


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture hyperparameters.

    ``c_o=None`` means the serial-fusion width follows ``c // q``; an integer
    fixes it (the "fixed output width" setting).
    """

    c: int = 256
    n: int = 4
    m: int = 4
    q: int = 4
    c_o: int | None = None
    r: int = 2
    ic: int = 1
    gff: str = "DGFF"
    bif: str = "SF"
    seed: int = 0

    def __post_init__(self):
        for name in ("c", "n", "m", "q", "ic"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ConfigurationError(f"{name} must be a positive integer, got {v!r}")
        if self.c_o is not None and (not isinstance(self.c_o, int) or self.c_o < 1):
            raise ConfigurationError(f"c_o must be a positive integer or None, got {self.c_o!r}")
        if self.r not in SCALES:
            raise ConfigurationError(f"r must be one of {SCALES}, got {self.r!r}")
        if self.c % self.q:
            raise ConfigurationError(f"q={self.q} must divide c={self.c}")
        if self.gff not in GFF_MODES:
            raise ConfigurationError(f"gff must be one of {GFF_MODES}, got {self.gff!r}")
        if self.bif not in BIF_MODES:
            raise ConfigurationError(f"bif must be one of {BIF_MODES}, got {self.bif!r}")

    @property
    def sub_width(self) -> int:
        return self.c // self.q

    @property
    def fusion_width(self) -> int:
        return self.sub_width if self.c_o is None else self.c_o

    @property
    def upscale_factors(self) -> tuple[int, ...]:
        return (2, 2) if self.r == 4 else (self.r,)

    @property
    def s(self) -> int:
        """Number of conv layers in the upscale module."""
        return len(self.upscale_factors)

    def replace(self, **changes) -> "NetworkConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})
