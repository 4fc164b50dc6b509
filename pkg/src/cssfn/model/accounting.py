"""Closed-form depth and parameter counts.

These are written independently of the wiring so that they can be checked
against the traced / built network.
"""
from __future__ import annotations

from .config import NetworkConfig


def unit_depth(cfg: NetworkConfig) -> int:
    if cfg.bif == "SF":
        return cfg.q + 1
    return 2


def compute_depth(cfg: NetworkConfig) -> int:
    """D = n [1 + m (q + 1)] + s + 6 for serial fusion units.

    The "6" counts three shallow convs, two fusion convs and the
    reconstruction conv; ``s`` is the number of upscale convs.
    """
    return cfg.n * (1 + cfg.m * unit_depth(cfg)) + cfg.s + 6


def _conv(cin: int, cout: int, k: int) -> tuple[int, int]:
    return k * k * cin * cout, cout


def _unit_counts(cfg: NetworkConfig) -> tuple[int, int]:
    c, q = cfg.c, cfg.q
    if cfg.bif == "SF":
        sub, co = cfg.sub_width, cfg.fusion_width
        w = 9 * sub * co + (q - 1) * 9 * (sub + co) * co + 9 * co * c
        b = q * co + c
    elif cfg.bif == "MAR":
        w = 2 * q * 9 * (c // q) ** 2
        b = 2 * c
    else:
        w = 2 * 9 * c * c
        b = 2 * c
    return w, b


def param_breakdown(cfg: NetworkConfig) -> dict[str, tuple[int, int]]:
    """(weights, biases) per network stage."""
    c, n, m = cfg.c, cfg.n, cfg.m
    parts: dict[str, tuple[int, int]] = {}

    shallow = [_conv(cfg.ic, c, 3), _conv(c, c, 1), _conv(c, c, 3)]
    parts["shallow"] = (sum(w for w, _ in shallow), sum(b for _, b in shallow))

    if cfg.gff == "DGFF":
        compress_w = sum(i * c * c for i in range(1, n + 1))
    else:
        compress_w = n * c * c
    uw, ub = _unit_counts(cfg)
    parts["blocks"] = (compress_w + n * m * uw, n * c + n * m * ub)

    fuse_in = (n + 1) * c if cfg.gff != "none" else c
    parts["fusion"] = (fuse_in * c + 9 * c * c, 2 * c)

    up = [_conv(c, c * f * f, 3) for f in cfg.upscale_factors]
    parts["upscale"] = (sum(w for w, _ in up), sum(b for _, b in up))

    parts["recon"] = _conv(c, cfg.ic, 3)
    return parts


def count_params(cfg: NetworkConfig, include_bias: bool = True) -> int:
    total = 0
    for w, b in param_breakdown(cfg).values():
        total += w + (b if include_bias else 0)
    return total


def millions(count: int) -> str:
    return f"{count / 1e6:.2f}M"
