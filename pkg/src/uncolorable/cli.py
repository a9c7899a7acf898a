"""Command line entry point: ``uncolorable train|protect|evaluate|mask|corpus``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .attacks import PRESETS, AttackConfig, run_attack
from .colorizers import ARCHITECTURES, MIN_INPUT_SIDE, l1_error, load_model, save_model, train_colorizer
from .data import load_training_pairs, photo_patch_corpus, write_corpus
from .evaluation import load_config, run_matrix
from .image_core import load_image, save_image, to_grayscale
from .masking import laplacian_mask
from .metrics import colorfulness, psnr, ssim

log = logging.getLogger("uncolorable")


def _train(args) -> int:
    settings = None
    if args.config:
        settings = load_config(args.config).training
    arch = args.arch or (settings.arch if settings else "small_cnn")
    epochs = args.epochs if args.epochs is not None else (settings.epochs if settings else 30)
    lr = args.lr if args.lr is not None else (settings.lr if settings else 2e-3)
    seed = args.seed if args.seed is not None else (settings.seed if settings else 0)
    grays, colors = load_training_pairs(args.data, args.size)
    batch = settings.batch_size if settings else 16
    noise = args.input_noise if args.input_noise is not None else (settings.input_noise if settings else 0.0)
    model = train_colorizer(arch, grays, colors, epochs=epochs, seed=seed, lr=lr, batch_size=batch,
                            input_noise=noise)
    save_model(model, args.out)
    print(f"trained {arch} ({model.n_params} parameters) on {len(grays)} images, "
          f"train L1 {l1_error(model, grays, colors):.4f} -> {args.out}")
    return 0


def _protect(args) -> int:
    model = load_model(args.model)
    img = load_image(args.inp)
    if img.ndim == 3:
        img = to_grayscale(img)
    if min(img.shape) < MIN_INPUT_SIDE:
        raise ValueError(f"input must be at least {MIN_INPUT_SIDE} pixels on each side, got {img.shape}")
    overrides = {"epsilon": args.eps / 255, "seed": args.seed}
    for key in ("iterations", "n_copies", "split", "momentum", "norm"):
        val = getattr(args, key)
        if val is not None:
            overrides[key] = val
    cfg = AttackConfig.preset(args.attack, **overrides)
    res = run_attack(model, img, cfg)
    save_image(res.adversarial, args.out)
    print(f"{args.attack}: output CF {res.cf_initial:.2f} -> {colorfulness(model.forward(res.adversarial)):.2f}, "
          f"input PSNR {psnr(img, res.adversarial):.2f} dB, SSIM {ssim(img, res.adversarial):.4f}")
    return 0


def _evaluate(args) -> int:
    cfg = load_config(args.config)
    if args.out:
        cfg.output_dir = str(args.out)
    picked = {k: getattr(args, k) for k in ("jpeg75", "jpeg50", "rrc")}
    if any(picked.values()):
        for k, v in picked.items():
            setattr(cfg.robustness, k, v)
    if args.workers:
        cfg.workers = args.workers
    run_matrix(cfg)
    print(f"reports written to {cfg.output_dir}")
    return 0


def _mask(args) -> int:
    img = load_image(args.inp)
    if img.ndim == 3:
        img = to_grayscale(img)
    save_image(laplacian_mask(img), args.out)
    return 0


def _corpus(args) -> int:
    imgs = photo_patch_corpus(args.n, args.size, args.seed)
    write_corpus(imgs, args.out)
    print(f"wrote {len(imgs)} images to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uncolorable", description="Perturbations that keep grayscale images from being colorized.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a toy colorizer on a directory of color images")
    t.add_argument("--arch", choices=sorted(ARCHITECTURES))
    t.add_argument("--data", required=True, type=Path)
    t.add_argument("--out", required=True, type=Path)
    t.add_argument("--config", type=Path, help="experiment config supplying training defaults")
    t.add_argument("--epochs", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--seed", type=int)
    t.add_argument("--input-noise", type=float, help="max std of Gaussian input noise during training")
    t.add_argument("--size", type=int, default=64)
    t.set_defaults(func=_train)

    pr = sub.add_parser("protect", help="perturb one grayscale image")
    pr.add_argument("--model", required=True, type=Path)
    pr.add_argument("--attack", default="pachroma", type=str.lower, choices=PRESETS)
    pr.add_argument("--eps", type=float, default=16.0, help="budget in 1/255 units")
    pr.add_argument("--in", dest="inp", required=True, type=Path)
    pr.add_argument("--out", required=True, type=Path)
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--iterations", type=int)
    pr.add_argument("--copies", dest="n_copies", type=int)
    pr.add_argument("--split", type=int)
    pr.add_argument("--momentum", type=float)
    pr.add_argument("--norm", choices=("linf", "l2"))
    pr.set_defaults(func=_protect)

    e = sub.add_parser("evaluate", help="run the source x target x attack matrix")
    e.add_argument("--config", required=True, type=Path)
    e.add_argument("--out", type=Path)
    e.add_argument("--jpeg75", action="store_true")
    e.add_argument("--jpeg50", action="store_true")
    e.add_argument("--rrc", action="store_true")
    e.add_argument("--workers", type=int)
    e.set_defaults(func=_evaluate)

    m = sub.add_parser("mask", help="export the Laplacian mask as an 8-bit PNG")
    m.add_argument("--in", dest="inp", required=True, type=Path)
    m.add_argument("--out", required=True, type=Path)
    m.set_defaults(func=_mask)

    c = sub.add_parser("corpus", help="write the photo-patch toy corpus to a directory")
    c.add_argument("--out", required=True, type=Path)
    c.add_argument("--n", type=int, default=600)
    c.add_argument("--size", type=int, default=64)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=_corpus)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
