"""Evaluation tables and the depth / parameter inspection report."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from ..data.degrade import degrade
from ..data.volume import Volume, load_volume, read_manifest
from ..metrics import MetricReport, evaluate_volume
from ..model.accounting import compute_depth, count_params, millions, param_breakdown
from ..model.config import NetworkConfig
from ..model.network import Network, build_network
from ..resize import upscale
from ..tensor import ConfigurationError
from .checkpoint import load_checkpoint
from .config import TrainConfig, parse_config_text
from .trainer import super_resolve

EVAL_COLUMNS = ("volume", "slices", "psnr", "ssim", "bicubic_psnr", "bicubic_ssim")


@dataclass
class EvalRow:
    volume: str
    slices: int
    model: MetricReport
    bicubic: MetricReport

    def as_tuple(self):
        return (self.volume, self.slices, self.model.psnr_db, self.model.ssim, self.bicubic.psnr_db, self.bicubic.ssim)


def network_from_checkpoint(path) -> tuple[Network, TrainConfig]:
    ckpt = load_checkpoint(path)
    cfg = parse_config_text(ckpt.config_text, origin=str(path))
    net = build_network(cfg.network, init="zeros")
    net.load_state_dict(ckpt.params)
    return net, cfg


def evaluate_volumes(net: Network, cfg: TrainConfig, volumes: list[Volume]) -> list[EvalRow]:
    ds = cfg.dataset
    rows = []
    for vol in volumes:
        s, h, w = vol.shape
        if h % ds.r or w % ds.r:
            raise ConfigurationError(f"{vol.name}: size {h}x{w} not divisible by r={ds.r}")
        if ds.execution == "pseudo3D" and s != cfg.network.ic:
            raise ConfigurationError(f"{vol.name}: {s} slices but the network expects ic={cfg.network.ic}")
        lr = degrade(vol.data, ds.r, ds.degradation)
        sr = super_resolve(net, lr, ds.execution)
        rows.append(
            EvalRow(vol.name, s, evaluate_volume(sr, vol.data), evaluate_volume(upscale(lr, ds.r), vol.data))
        )
    return rows


def format_table(rows: list[EvalRow]) -> str:
    header = ("volume", "slices", "PSNR (dB)", "SSIM", "bicubic PSNR", "bicubic SSIM")
    body = [
        (r.volume, str(r.slices), f"{r.model.psnr_db:.2f}", f"{r.model.ssim:.4f}", f"{r.bicubic.psnr_db:.2f}", f"{r.bicubic.ssim:.4f}")
        for r in rows
    ]
    widths = [max(len(x) for x in col) for col in zip(header, *body)]
    lines = ["  ".join(x.rjust(wd) for x, wd in zip(row, widths)) for row in [header, *body]]
    lines.insert(1, "  ".join("-" * wd for wd in widths))
    return "\n".join(lines)


def write_csv(rows: list[EvalRow], path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(EVAL_COLUMNS)
        for r in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in r.as_tuple()])


def run_eval(ckpt_path, manifest, out_csv=None, split: str = "test") -> list[EvalRow]:
    net, cfg = network_from_checkpoint(ckpt_path)
    records = read_manifest(manifest)
    chosen = [p for p, s in records if s == split]
    if not chosen:
        raise ConfigurationError(f"{manifest}: no volumes in split {split!r}")
    rows = evaluate_volumes(net, cfg, [load_volume(p) for p in chosen])
    if out_csv is not None:
        Path(out_csv).parent.mkdir(parents=True, exist_ok=True)
        write_csv(rows, out_csv)
    return rows


# ---------------------------------------------------------------------------
# inspect


def inspect_config(cfg: NetworkConfig) -> dict:
    net = build_network(cfg, init="zeros")
    return {
        "depth_formula": compute_depth(cfg),
        "depth_measured": net.longest_conv_path(),
        "params": count_params(cfg),
        "params_weights_only": count_params(cfg, include_bias=False),
        "params_built": net.num_parameters(),
        "breakdown": param_breakdown(cfg),
    }


def format_inspect(cfg: NetworkConfig, rep: dict) -> str:
    co = "c/q" if cfg.c_o is None else cfg.c_o
    lines = [
        f"CSSFN  c={cfg.c} n={cfg.n} m={cfg.m} q={cfg.q} c_o={co} r={cfg.r} ic={cfg.ic} gff={cfg.gff} bif={cfg.bif}",
        f"depth D (formula)        {rep['depth_formula']}",
        f"depth (longest path)     {rep['depth_measured']}",
        f"parameters (with bias)   {rep['params']:,}  ({millions(rep['params'])})",
        f"parameters (weights)     {rep['params_weights_only']:,}  ({millions(rep['params_weights_only'])})",
        f"parameters (built net)   {rep['params_built']:,}",
        "breakdown:",
    ]
    for name, (w, b) in rep["breakdown"].items():
        lines.append(f"  {name:<10} weights {w:>12,}  biases {b:>8,}")
    return "\n".join(lines)
