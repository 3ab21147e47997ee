"""Command-line entry point: train, infer, eval, ablate, gradcheck.

Exit codes: 0 success, 1 runtime/data error, 2 usage/config error.
Hyperparameters come from defaults, then an optional flat ``key = value``
config file, then repeated ``--set key=value`` flags, in that order of
precedence (later wins). Every command is deterministic given its flags,
config and seed.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path

import numpy as np

from . import data, gradcheck, losses, metrics, model, trainer
from .trainer import ConfigError

__all__ = ["main", "run"]

# every accepted config key with its parser; all keys have defaults
_KEY_TYPES = {
    "epochs": int,
    "batch_size": int,
    "lr": float,
    "lr_decay": float,
    "lr_decay_every": int,
    "beta1": float,
    "beta2": float,
    "adam_eps": float,
    "seed": int,
    "early_stop_epoch": int,
    "alpha": float,
    "beta": float,
    "gamma": float,
    "blur_sigma": float,
    "blur_kernel": int,
    "ssim_window": int,
    "ssim_sigma": float,
    "ssim_k1": float,
    "ssim_k2": float,
    "data_range": float,
    "levels": int,
    "domain_variant": str,
    "width_scale": float,
    "kernel": int,
    "synth_size": int,
}

_LOSS_KEYS = (
    "alpha", "beta", "gamma", "blur_sigma", "blur_kernel",
    "ssim_window", "ssim_sigma", "ssim_k1", "ssim_k2", "data_range",
)
_TRAIN_KEYS = (
    "epochs", "batch_size", "lr", "lr_decay", "lr_decay_every",
    "beta1", "beta2", "adam_eps", "seed", "early_stop_epoch",
)


def _typed(raw: dict[str, str]) -> dict:
    out = {}
    for key, value in raw.items():
        if key not in _KEY_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            out[key] = _KEY_TYPES[key](value)
        except ValueError as e:
            raise ConfigError(f"config key {key!r}: cannot parse {value!r}") from e
    return out


def _gather_config(args) -> dict:
    cfg: dict = {}
    if getattr(args, "config", None):
        cfg.update(_typed(trainer.load_config_file(args.config)))
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        cfg.update(_typed({key.strip(): value.strip()}))
    return cfg


def _build_configs(cfg: dict):
    loss = losses.LossConfig(**{k: cfg[k] for k in _LOSS_KEYS if k in cfg})
    tc = trainer.TrainConfig(loss=loss, **{k: cfg[k] for k in _TRAIN_KEYS if k in cfg})
    mc = model.ModelConfig.default(
        levels=cfg.get("levels", 3),
        domain_variant=cfg.get("domain_variant", "wavelet"),
        width_scale=cfg.get("width_scale", 1.0),
        kernel=cfg.get("kernel", 3),
    )
    return mc, tc


def _synthetic_pairs(n: int, size: int) -> list[data.ImagePair]:
    return [
        data.synth_relight_pair(i, size, data.DEFAULT_FROM, data.DEFAULT_TO, name=f"synth-{i:03d}")
        for i in range(n)
    ]


def _cmd_train(args) -> int:
    cfg = _gather_config(args)
    model_cfg, train_cfg = _build_configs(cfg)
    if args.synthetic is not None:
        pairs = _synthetic_pairs(args.synthetic, cfg.get("synth_size", 64))
    else:
        pairs = data.load_paired_dataset(args.data)
    ds = data.split(pairs, (0.75, 0.125, 0.125), seed=train_cfg.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params = model.build(model_cfg, seed=train_cfg.seed)
    (out / "summary.txt").write_text(model.summary(params) + "\n", encoding="utf-8")
    data.write_split_manifest(ds, out / "split.tsv")
    result = trainer.train(model_cfg, ds, train_cfg, out_dir=out)
    print(f"trained {len(result.log)} epochs; artifacts in {out}")
    return 0


def _cmd_infer(args) -> int:
    ckpt = trainer.load_checkpoint(args.checkpoint)
    params = ckpt.to_parameter_set()
    div = model.divisibility(ckpt.config)
    files = sorted(Path(args.input).glob("*.png"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if not files:
        print(f"warning: no PNG files found in {args.input}", file=sys.stderr)
        return 0
    failures = 0
    for f in files:
        try:
            x = data.load_png(f)
            _, h, w, _ = x.data.shape
            if h % div or w % div:
                raise data.DataError(
                    f"{f.name}: {h}x{w} not divisible by {div} "
                    f"(required by a {ckpt.config.levels}-level model)"
                )
            start = time.perf_counter()
            pred = model.forward(params, x)
            elapsed = time.perf_counter() - start
            data.save_png(out / f.name, pred)
            print(f"{f.name}: {elapsed * 1000.0:.1f} ms")
        except (data.DataError, ValueError) as e:
            print(f"error: {e}", file=sys.stderr)
            failures += 1
    return 1 if failures else 0


def _read_lpips(path) -> dict[str, float]:
    table: dict[str, float] = {}
    with open(path, encoding="utf-8", newline="") as f:
        for row in csv.reader(f):
            if not row or row[0].strip().startswith("#"):
                continue
            if row[0].strip() == "name":
                continue
            table[row[0].strip()] = float(row[1])
    return table


def _cmd_eval(args) -> int:
    lpips_table = _read_lpips(args.lpips) if args.lpips else {}
    loss_cfg = losses.LossConfig()
    files = sorted(Path(args.pred).glob("*.png"))
    reports: list[metrics.MetricsReport] = []
    failures = 0
    for f in files:
        gt = Path(args.gt) / f.name
        try:
            if not gt.exists():
                raise data.DataError(f"{f.name}: no ground-truth file at {gt}")
            pred = data.load_png(f)
            target = data.load_png(gt)
            reports.append(
                metrics.MetricsReport.compute(
                    f.stem, pred, target, lpips=lpips_table.get(f.stem), cfg=loss_cfg
                )
            )
        except (data.DataError, ValueError) as e:
            print(f"error: {e}", file=sys.stderr)
            reports.append(metrics.MetricsReport(f.stem, float("nan"), float("nan")))
            failures += 1
    stream = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
    try:
        metrics.write_report(reports, stream)
    finally:
        if args.out:
            stream.close()
    return 1 if failures else 0


def _ablate_variants(which: str):
    if which == "domain":
        return [("wavelet", 3, "wavelet"), ("strided", 3, "strided")]
    return [("2_level", 2, "wavelet"), ("3_level", 3, "wavelet"), ("4_level", 4, "wavelet")]


def _cmd_ablate(args) -> int:
    pairs = _synthetic_pairs(args.synthetic, args.size)
    ds = data.split(pairs, (0.75, 0.25, 0.0), seed=args.seed)
    loss_cfg = losses.LossConfig(blur_sigma=2.0, blur_kernel=9)
    out_dir = Path(args.out) if args.out else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for label, levels, variant in _ablate_variants(args.which):
        model_cfg = model.ModelConfig.default(
            levels=levels, domain_variant=variant, width_scale=args.width_scale
        )
        train_cfg = trainer.TrainConfig(
            epochs=args.steps,
            batch_size=len(ds.train),
            lr=1e-3,
            lr_decay=1.0,
            seed=args.seed,
            loss=loss_cfg,
        )
        result = trainer.train(model_cfg, ds, train_cfg, out_dir=None)
        params = result.checkpoint.to_parameter_set()
        held_out = ds.val or ds.train
        psnrs, ssims = [], []
        for p in held_out:
            pred = model.forward(params, p.input_image)
            psnrs.append(metrics.psnr(pred, p.target_image))
            ssims.append(metrics.ssim_metric(pred, p.target_image, loss_cfg))
        rows.append((label, float(np.mean(psnrs)), float(np.mean(ssims))))
        if out_dir is not None:
            with open(out_dir / f"log_{label}.csv", "w", encoding="utf-8", newline="") as f:
                trainer._write_log(result.log, f)
    stream = open(out_dir / "ablation.csv", "w", encoding="utf-8", newline="") if out_dir else sys.stdout
    try:
        stream.write("variant,psnr,ssim\n")
        for label, p, s in rows:
            stream.write(f"{label},{p:.6f},{s:.6f}\n")
    finally:
        if out_dir:
            stream.close()
    return 0


def _cmd_gradcheck(args) -> int:
    results = gradcheck.run_suite(corrupt=args.corrupt)
    width = max(len(r.op) for r in results)
    for r in results:
        status = "ok" if r.passed else "FAIL"
        print(f"{r.op:<{width}}  {r.max_rel_err:12.3e}  {status}")
    worst = max(r.max_rel_err for r in results)
    print(f"{'worst':<{width}}  {worst:12.3e}")
    return 0 if all(r.passed for r in results) else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="wavelight",
        description="Wavelet-domain relighting network: training, inference, evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model on paired PNGs or synthetic pairs")
    p.add_argument("--config", help="flat key = value config file")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="dataset root containing input/ and target/")
    src.add_argument("--synthetic", type=int, metavar="N", help="use N synthetic pairs")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("infer", help="relight every PNG in a directory")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("eval", help="PSNR/SSIM (and MPS given external LPIPS) over a directory")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--lpips", help="CSV of name,lpips rows")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ablate", help="train ablation variants under one seed and budget")
    p.add_argument("--which", required=True, choices=("domain", "levels"))
    p.add_argument("--synthetic", type=int, default=8, metavar="N")
    p.add_argument("--steps", type=int, default=60)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=32, help="synthetic image size")
    p.add_argument("--width-scale", type=float, default=0.125, dest="width_scale")
    p.add_argument("--out", help="also write ablation.csv and per-variant logs here")
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("gradcheck", help="finite-difference check of every backward pass")
    p.add_argument("--corrupt", help=argparse.SUPPRESS)
    p.set_defaults(func=_cmd_gradcheck)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (data.DataError, trainer.CheckpointError, trainer.TrainingError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def run() -> None:
    sys.exit(main())
