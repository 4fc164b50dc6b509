"""Command-line entry point: ``cssfn {inspect,degrade,train,eval}``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .data.degrade import degrade
from .data.volume import Volume, load_volume, partition, save_volume, synth_phantom, write_manifest
from .harness.config import load_config
from .harness.evaluate import format_inspect, format_table, inspect_config, run_eval
from .harness.trainer import Trainer
from .tensor import ConfigurationError


def cmd_inspect(args) -> int:
    cfg = load_config(args.config)
    print(format_inspect(cfg.network, inspect_config(cfg.network)))
    return 0


def cmd_degrade(args) -> int:
    cfg = load_config(args.config)
    ds = cfg.dataset
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.input is None:
        # no input directory: synthesise phantoms as the HR set
        hr_dir = out / "hr"
        hr_dir.mkdir(exist_ok=True)
        seeds = np.random.SeedSequence(ds.seed).spawn(ds.n_volumes)
        hr_paths = []
        for i, ss in enumerate(seeds):
            vol = synth_phantom(ds.phantom, np.random.default_rng(ss), name=f"phantom{i:03d}")
            path = hr_dir / f"{vol.name}.vol"
            save_volume(vol, path)
            hr_paths.append(path)
    else:
        hr_paths = sorted(Path(args.input).glob("*.vol"))
        if not hr_paths:
            raise ConfigurationError(f"no .vol files in {args.input}")
    lr_dir = out / "lr"
    lr_dir.mkdir(exist_ok=True)
    for path in hr_paths:
        vol = load_volume(path)
        lr = Volume(degrade(vol.data, ds.r, ds.degradation), vol.max_value, vol.name)
        save_volume(lr, lr_dir / f"{path.stem}_lr.vol")
    splits = partition(len(hr_paths), ds.split_fractions, ds.seed)
    write_manifest([(p.resolve(), s) for p, s in zip(hr_paths, splits)], out / "manifest.txt")
    print(f"wrote {len(hr_paths)} LR volumes ({ds.degradation}, x{ds.r}) and {out / 'manifest.txt'}")
    return 0


def cmd_train(args) -> int:
    if args.resume:
        trainer = Trainer.from_checkpoint(args.resume, args.out)
    else:
        trainer = Trainer(load_config(args.config), args.out)
    until = args.iterations if args.iterations is not None else None
    history = trainer.run(until)
    last = history[-1] if history else float("nan")
    print(f"iteration {trainer.iteration}: train L1 {last:.6g}; checkpoint {Path(args.out) / 'checkpoint.csck'}")
    return 0


def cmd_eval(args) -> int:
    rows = run_eval(args.ckpt, args.data, args.out, split=args.split)
    print(format_table(rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cssfn", description="Channel splitting and serial fusion SR network")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", help="depth and parameter report")
    p.add_argument("--config", required=True, help="config file or preset name (tiny, small, paper)")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("degrade", help="build LR volumes and a manifest")
    p.add_argument("--config", required=True)
    p.add_argument("--in", dest="input", help="directory of .vol files (default: synthesise phantoms)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("train", help="train a network")
    p.add_argument("--config", help="config file or preset name")
    p.add_argument("--out", required=True)
    p.add_argument("--resume", help="checkpoint to continue from")
    p.add_argument("--iterations", type=int, help="stop at this iteration (default: total_iterations)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="PSNR/SSIM table for a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True, help="manifest file")
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--split", default="test")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "train" and not (args.config or args.resume):
        parser.error("train needs --config or --resume")
    try:
        return args.func(args)
    except (ConfigurationError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
