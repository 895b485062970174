"""Command-line entry point: ``train``, ``denoise``, ``flops``, ``inspect``.

Exit codes: 0 success, 2 configuration / usage error, 3 numeric failure,
4 corrupt artifact.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .attention import AttentionConfig, WindowAttention, attention_unit, flops_msa, flops_wsa
from .checkpoint import CheckpointError, load_checkpoint, load_model, manifest
from .config import ConfigError, RunConfig, dump
from .data import ImagePair, load_image, load_paired_folder, save_image, synthesize_awgn, synthetic_image
from .inference import denoise_tiled
from .metrics import psnr, ssim
from .network import DnSwin
from .tensor import Tensor, mac_counter, no_grad
from .training import NonFiniteLossError, train

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CORRUPT = 0, 2, 3, 4


def build_synthetic(data_cfg, seed, patch):
    """Clean training images plus fixed-noise held-out pairs, all derived from ``seed``."""
    size = max(data_cfg.image_size, patch)
    rng = np.random.default_rng([seed, 1])
    train_pairs = []
    for _ in range(data_cfg.n_train):
        clean = synthetic_image(size, rng)
        train_pairs.append(ImagePair(clean.copy(), clean, "synthetic"))
    val_rng = np.random.default_rng([seed, 2])
    val_pairs = [
        synthesize_awgn(synthetic_image(size, val_rng), data_cfg.val_sigma, val_rng) for _ in range(data_cfg.n_val)
    ]
    return train_pairs, val_pairs


def cmd_train(args, out=print):
    run = RunConfig("train", args.config, args.seed, args.set or [])
    model_cfg, train_cfg, data_cfg = run.resolve()
    if args.steps is not None:
        if args.steps < 0:
            raise ConfigError("--steps must be non-negative")
        train_cfg.steps = args.steps
    if args.loss_global:
        train_cfg.loss_global = True
    if data_cfg.data == "synthetic":
        if train_cfg.noise_sigma <= 0:
            raise ConfigError("synthetic data needs noise_sigma > 0")
        train_pairs, val_pairs = build_synthetic(data_cfg, train_cfg.seed, model_cfg.train_patch)
    else:
        try:
            pairs = load_paired_folder(data_cfg.data)
        except (OSError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        n_val = data_cfg.n_val if len(pairs) > data_cfg.n_val else 0
        train_pairs, val_pairs = pairs[: len(pairs) - n_val], pairs[len(pairs) - n_val :]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.txt").write_text(dump(model_cfg, train_cfg, data_cfg))
    model = DnSwin(model_cfg, seed=train_cfg.seed)
    mode = "a" if args.resume else "w"
    with open(out_dir / "metrics.tsv", mode, encoding="utf-8") as log:
        result = train(
            train_pairs, model, train_cfg, val=val_pairs, out_dir=out_dir, resume=args.resume,
            log=lambda line: log.write(line + "\n"),
        )
    out(f"checkpoint: {result.checkpoint}")
    if result.losses:
        out(f"final loss: {result.losses[-1]:.6f}")
    if result.val_psnr:
        last = max(result.val_psnr)
        noisy = float(np.mean([psnr(p.noisy, p.clean) for p in val_pairs]))
        out(f"val PSNR: {result.val_psnr[last]:.3f} dB (noisy input {noisy:.3f} dB)")
    return EXIT_OK


def cmd_denoise(args, out=print):
    model, _ = load_model(args.checkpoint)
    try:
        image = load_image(args.input)
    except OSError as exc:
        raise ConfigError(f"cannot load {args.input}: {exc}") from exc
    tile = args.tile or model.cfg.train_patch
    if tile != model.cfg.train_patch:
        raise ConfigError(f"--tile must equal the model's train_patch ({model.cfg.train_patch}), got {tile}")
    if not 0 <= args.overlap < tile:
        raise ConfigError(f"--overlap must lie in [0, {tile})")
    result = np.clip(denoise_tiled(model, image, tile=tile, overlap=args.overlap), 0.0, 1.0)
    save_image(args.output, result)
    out(f"wrote {args.output} ({image.shape[1]}x{image.shape[2]})")
    if args.reference:
        ref = load_image(args.reference)
        out(f"input  PSNR {psnr(image, ref):.3f} dB  SSIM {ssim(image, ref):.4f}")
        out(f"output PSNR {psnr(result, ref):.3f} dB  SSIM {ssim(result, ref):.4f}")
    return EXIT_OK


def instrumented_wsa_macs(h, w, c, m, seed=0):
    """Run one unshifted attention unit on a random H x W x C map and count its MACs."""
    rng = np.random.default_rng(seed)
    unit = WindowAttention(AttentionConfig(m, 1, c), rng)
    x = Tensor(rng.uniform(-1, 1, size=(1, h, w, c)))
    with no_grad(), mac_counter() as counter:
        attention_unit(x, unit, shift=0)
    return counter["proj"] + counter["attn"]


def cmd_flops(args, out=print):
    h, w, c, m = args.H, args.W, args.C, args.M
    if min(h, w, c, m) < 1:
        raise ConfigError("H, W, C, M must be positive")
    msa, wsa_count = flops_msa(h, w, c), flops_wsa(h, w, c, m)
    out(f"flops_msa {msa:,}")
    out(f"flops_wsa {wsa_count:,}")
    out(f"ratio {msa / wsa_count:.4f}")
    if h % m or w % m:
        out("instrumented n/a (H, W not multiples of M)")
    else:
        counted = instrumented_wsa_macs(h, w, c, m)
        out(f"instrumented {counted:,} {'MATCH' if counted == wsa_count else 'MISMATCH'}")
    return EXIT_OK


def cmd_inspect(args, out=print):
    entries = load_checkpoint(args.checkpoint)
    total = 0
    for name, shape in manifest(entries):
        out(f"{name}\t{'x'.join(map(str, shape)) or 'scalar'}")
        if name.startswith("model."):
            total += int(np.prod(shape, dtype=np.int64))
    out(f"parameters {total}")
    for name, arr in entries.items():
        if name.startswith("config."):
            out(f"{name[7:]} = {arr.item():g}")
    if "optim.step" in entries:
        out(f"step = {int(entries['optim.step'])}")
    return EXIT_OK


def build_parser():
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="flat key = value config file")
    shared.add_argument("--seed", type=int)
    shared.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")

    parser = argparse.ArgumentParser(prog="dnswin", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[shared], help="train a model")
    p.add_argument("--steps", type=int)
    p.add_argument("--out", default="runs/dnswin")
    p.add_argument("--resume", help="checkpoint to continue from")
    p.add_argument("--loss-global", action="store_true", help="Charbonnier over the whole residual norm")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("denoise", parents=[shared], help="denoise an image with a trained model")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--tile", type=int)
    p.add_argument("--overlap", type=int, default=16)
    p.add_argument("--reference", help="clean image for PSNR / SSIM")
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("flops", parents=[shared], help="attention complexity report")
    for name in ("H", "W", "C", "M"):
        p.add_argument(name, type=int)
    p.set_defaults(func=cmd_flops)

    p = sub.add_parser("inspect", parents=[shared], help="print a checkpoint manifest")
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None, out=print):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args, out=out)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonFiniteLossError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except CheckpointError as exc:
        print(f"error: corrupt checkpoint: {exc}", file=sys.stderr)
        return EXIT_CORRUPT


if __name__ == "__main__":
    sys.exit(main())
