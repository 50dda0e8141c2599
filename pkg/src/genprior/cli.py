"""Command line interface: generate, blur-demo, infer, experiment, report,
validate-weights."""

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, rng, synthetic
from .baselines import guide, l2_oracle
from .forward_model import LinearModel, build_blur, observe, psnr
from .generator import (WeightsParseError, WeightsValidationError, g_mean,
                        load_weights, sample_prior_draw)
from .laplace_inference import laplace_estimate, marginal_pixel_std
from .latent_inference import LatentPosterior, latent_estimate


def _save_image_grid(images, side, path, ncols=8, titles=None):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    n = len(images)
    ncols = min(ncols, n)
    nrows = (n + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(1.4 * ncols, 1.5 * nrows))
    axes = np.atleast_1d(axes).ravel()
    for ax in axes:
        ax.axis("off")
    for k, img in enumerate(images):
        axes[k].imshow(np.asarray(img).reshape(side, side), cmap="gray",
                       vmin=0.0, vmax=1.0)
        if titles is not None:
            axes[k].set_title(titles[k], fontsize=7)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _load_net(args):
    if getattr(args, "synthetic", False):
        return synthetic.suite_net(), synthetic.SUITE_HEIGHT
    if args.weights is None:
        raise SystemExit("either --weights or --synthetic is required")
    net = load_weights(args.weights)
    side = int(round(np.sqrt(net.output_dim)))
    return net, side


def cmd_generate(args):
    net, side = _load_net(args)
    draws = [sample_prior_draw(net, rng.derive_seed(args.seed, "draw", k))
             for k in range(args.count)]
    _save_image_grid(draws, side, args.out)
    print(f"wrote {args.count} prior draws to {args.out}")
    return 0


def _load_truth(args):
    if args.synthetic:
        _, images = synthetic.suite_images(max(args.index + 1, 1))
        return images[args.index], synthetic.SUITE_HEIGHT
    if args.images is None:
        raise SystemExit("either --images or --synthetic is required")
    from .experiments import load_idx_images

    pairs = load_idx_images(args.images, args.labels, limit=args.index + 1)
    x, _ = pairs[args.index]
    side = int(round(np.sqrt(x.size)))
    return x, side


def cmd_blur_demo(args):
    x, side = _load_truth(args)
    etas = [float(e) for e in args.etas.split(",")]
    images = [x]
    titles = ["original"]
    for eta in etas:
        blur = build_blur(eta, side, side, args.radius)
        images.append(blur.matrix @ x)
        titles.append(f"eta={eta:g}")
    _save_image_grid(images, side, args.out, ncols=len(images), titles=titles)
    print(f"wrote blur demo to {args.out}")
    return 0


def cmd_infer(args):
    x, side = _load_truth(args)
    if args.synthetic:
        net = synthetic.suite_net()
    else:
        net, _ = _load_net(args)
    blur = build_blur(args.eta, side, side, args.radius)
    sigma = 10.0 ** (-args.sigma_exp) if args.sigma is None else args.sigma
    model = LinearModel(blur.matrix, sigma * sigma)
    y = observe(model, x, seed=args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    images = [x, y]
    titles = ["truth", "observation"]
    if args.method == "l2":
        est, lam = l2_oracle(model.A, y, x)
        print(f"oracle lambda = {lam:g}")
    elif args.method == "latent":
        est = latent_estimate(LatentPosterior(model, net), y,
                              restarts=args.restarts)
    elif args.method == "laplace":
        post = laplace_estimate(model, y, net, restarts=args.restarts)
        est = post.xhat
        std = marginal_pixel_std(post)
        smax = float(std.max())
        _save_image_grid([std / smax if smax > 0 else std], side,
                         os.path.join(args.out_dir, "pixel_std.png"),
                         titles=[f"pixel std (max {smax:.3g})"])
    else:
        verdict = guide(model, y, net, seed=args.seed,
                        cross_validate=args.guide_cross,
                        restarts=args.restarts)
        est = verdict.estimate
        print(f"guide chose {verdict.chosen} "
              f"(err_laplace={verdict.err_laplace:.4g}, "
              f"err_latent={verdict.err_latent:.4g})")
    images.append(est)
    titles.append(args.method)
    _save_image_grid(images, side,
                     os.path.join(args.out_dir, "reconstruction.png"),
                     ncols=3, titles=titles)
    score = psnr(x, est)
    print(f"PSNR = {score:.4f} dB")
    return 0


def cmd_experiment(args):
    from .experiments import ExperimentConfig, run_experiment

    cfg = ExperimentConfig.from_file(args.config)
    csv_path = run_experiment(cfg, output_dir=args.output_dir)
    print(f"wrote {csv_path}")
    return 0


def cmd_report(args):
    from .experiments import report

    for path in report(args.csv, args.out_dir):
        print(f"wrote {path}")
    return 0


def cmd_validate_weights(args):
    try:
        net = load_weights(args.weights)
    except (WeightsParseError, WeightsValidationError) as exc:
        print(f"INVALID: {exc}")
        return 2
    enc = "yes" if net.has_encoder else "no"
    print(f"OK: latent_dim={net.latent_dim} output_dim={net.output_dim} "
          f"mean_layers={len(net.mean_layers)} "
          f"cov={net.cov_head.variant} (eps_gamma={net.cov_head.eps_gamma:g}) "
          f"encoder={enc}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="genprior",
        description="Linear Gaussian inverse problems with generative priors")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="render prior draws as an image grid")
    p.add_argument("--weights")
    p.add_argument("--synthetic", action="store_true",
                   help="use the bundled synthetic generator")
    p.add_argument("--count", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="prior_draws.png")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("blur-demo", help="show an image blurred at several etas")
    p.add_argument("--etas", default="5,4,3,2")
    p.add_argument("--radius", type=int, default=4)
    p.add_argument("--images", help="IDX images file")
    p.add_argument("--labels")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--synthetic", action="store_true")
    p.add_argument("--out", default="blur_demo.png")
    p.set_defaults(func=cmd_blur_demo)

    p = sub.add_parser("infer", help="reconstruct one image with one method")
    p.add_argument("--method", required=True,
                   choices=["l2", "latent", "laplace", "guide"])
    p.add_argument("--eta", type=float, default=3.0)
    p.add_argument("--sigma-exp", type=int, default=2, dest="sigma_exp")
    p.add_argument("--sigma", type=float, default=None,
                   help="overrides --sigma-exp")
    p.add_argument("--radius", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weights")
    p.add_argument("--images")
    p.add_argument("--labels")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--synthetic", action="store_true")
    p.add_argument("--restarts", type=int, default=0)
    p.add_argument("--guide-cross", action="store_true")
    p.add_argument("--out-dir", default="infer_out")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("experiment", help="run a sweep from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir", default=None)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", help="render charts and summary from a CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--out-dir", default="report_out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("validate-weights", help="check a weights file")
    p.add_argument("--weights", required=True)
    p.set_defaults(func=cmd_validate_weights)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
