"""Trainer CLI: train/export, and the blurred-digit evaluation protocol."""

import argparse
import json
import os
import sys

import numpy as np

from .data import load_mnist
from .export import decoder_forward_f64, export_weights
from .train import (
    TrainerConfig,
    constant_baseline_psnr,
    reconstruction_psnr,
    train,
)


def _save_grid(images, side, path, ncols=8):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    n = len(images)
    nrows = (n + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(1.2 * ncols, 1.3 * nrows))
    for ax in np.atleast_1d(axes).ravel():
        ax.axis("off")
    for k, img in enumerate(images):
        np.atleast_1d(axes).ravel()[k].imshow(
            np.asarray(img).reshape(side, side), cmap="gray", vmin=0, vmax=1)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def cmd_train(args):
    cfg = TrainerConfig(latent_dim=args.latent_dim, hidden=args.hidden,
                        epochs=args.epochs, transfer_epochs=args.transfer_epochs,
                        batch_size=args.batch_size,
                        learning_rate=args.learning_rate, seed=args.seed,
                        out=args.out)
    try:
        train_imgs, test_imgs = load_mnist(args.mnist_dir,
                                           train_limit=args.limit,
                                           test_limit=1000)
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    model, report = train(train_imgs, cfg)
    export_weights(model, cfg.out)
    print(f"wrote {cfg.out}")

    vae_psnr = reconstruction_psnr(model, test_imgs)
    base_psnr = constant_baseline_psnr(train_imgs, test_imgs)
    print(f"reconstruction PSNR {vae_psnr:.2f} dB vs constant-mean baseline "
          f"{base_psnr:.2f} dB")

    if args.report_dir:
        os.makedirs(args.report_dir, exist_ok=True)
        with open(os.path.join(args.report_dir, "training_report.json"), "w",
                  encoding="utf-8") as fh:
            json.dump({"elbo_curve": report.elbo_curve,
                       "cov_curve": report.cov_curve,
                       "wall_s": report.wall_s,
                       "reconstruction_psnr": vae_psnr,
                       "constant_baseline_psnr": base_psnr}, fh, indent=1)
        import torch

        gen = torch.Generator().manual_seed(123)
        zs = torch.randn(64, cfg.latent_dim, generator=gen).double().numpy()
        draws = decoder_forward_f64(model, zs)
        side = int(round(np.sqrt(draws.shape[1])))
        _save_grid(draws, side, os.path.join(args.report_dir,
                                             "prior_draws.png"))
        print(f"wrote report to {args.report_dir}")
    return 0


def cmd_evaluate(args):
    """Blurred-digit comparison: laplace route vs the oracle-L2 baseline.

    Runs the consumer package on MNIST test digits through its public API;
    reports how many images the generator prior wins on.
    """
    from genprior import LinearModel, build_blur, l2_oracle, load_weights, observe, psnr
    from genprior.laplace_inference import laplace_estimate

    net = load_weights(args.weights)
    side = int(round(np.sqrt(net.output_dim)))
    _, test_imgs = load_mnist(args.mnist_dir, train_limit=1,
                              test_limit=args.count)
    blur = build_blur(args.eta, side, side, 4)
    model = LinearModel(blur.matrix, args.sigma**2)
    wins = 0
    for i, x in enumerate(test_imgs[:args.count]):
        y = observe(model, x, seed=args.seed + i)
        lap = psnr(x, laplace_estimate(model, y, net).xhat)
        l2 = psnr(x, l2_oracle(blur.matrix, y, x)[0])
        wins += lap > l2
        if args.verbose:
            print(f"image {i}: laplace {lap:.2f} dB, oracle-l2 {l2:.2f} dB")
    print(f"laplace beats oracle-l2 on {wins}/{args.count} images "
          f"(eta={args.eta}, sigma={args.sigma})")
    return 0 if wins >= args.threshold else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="genprior-train")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on MNIST and export weights")
    p.add_argument("--mnist-dir", required=True)
    p.add_argument("--latent-dim", type=int, default=20)
    p.add_argument("--hidden", type=int, default=256)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--transfer-epochs", type=int, default=5)
    p.add_argument("--batch-size", type=int, default=512)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--limit", type=int, default=None,
                   help="cap on training images (for smoke runs)")
    p.add_argument("--out", default="weights.json")
    p.add_argument("--report-dir", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate",
                       help="compare laplace route vs oracle-l2 on test digits")
    p.add_argument("--weights", required=True)
    p.add_argument("--mnist-dir", required=True)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--eta", type=float, default=3.0)
    p.add_argument("--sigma", type=float, default=1e-2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=int, default=60)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
