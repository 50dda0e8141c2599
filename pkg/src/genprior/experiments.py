"""Dataset ingestion, sweep orchestration, results persistence and reports.

A sweep runs every (image, blur precision, noise level, repeat, method) cell
with a per-cell seed derived from the base seed, so any cell can be replayed
in isolation and the whole CSV is byte-reproducible. Wall-clock timings are
kept in the run manifest; they only enter the CSV when ``timings_in_csv`` is
set, since timing is the one field that cannot be bit-reproducible.

The report step renders per-eta mean-PSNR curves and per-(sigma, method)
box plots (quartiles use numpy's linear interpolation convention) as SVG,
plus a plain-text summary table.
"""

import csv
import json
import struct
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__, rng, synthetic
from .baselines import guide, l2_oracle
from .forward_model import LinearModel, build_blur, observe, psnr
from .generator import g_mean, load_weights
from .laplace_inference import laplace_estimate
from .latent_inference import LatentPosterior, initial_map_estimate

CSV_COLUMNS = ("image_id", "eta", "sigma", "repeat", "method", "psnr",
               "wall_ms", "seed", "converged")
VALID_METHODS = ("l2", "latent", "laplace", "guide")

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class IdxParseError(ValueError):
    """IDX file violates the format; message carries the byte offset."""


@dataclass
class ExperimentConfig:
    dataset: str = "synthetic"
    labels: str | None = None
    image_count: int = 100
    eta_list: tuple = (2.0, 3.0, 4.0, 5.0)
    sigma_exponents: tuple = (1, 2, 3, 4)
    repeats: int = 1
    methods: tuple = ("l2", "latent", "laplace")
    base_seed: int = 0
    generator: str | None = None
    output_dir: str = "results"
    radius: int = 4
    guide_cross_validate: bool = False
    guide_noiseless: bool = False
    latent_restarts: int = 0
    lambda_grid_points: int = 61
    timings_in_csv: bool = False

    def __post_init__(self):
        self.eta_list = tuple(float(e) for e in self.eta_list)
        self.sigma_exponents = tuple(int(s) for s in self.sigma_exponents)
        self.methods = tuple(self.methods)
        if not self.methods:
            raise ValueError("methods must be nonempty")
        for m in self.methods:
            if m not in VALID_METHODS:
                raise ValueError(f"unknown method {m!r}; valid: {VALID_METHODS}")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.image_count < 0:
            raise ValueError("image_count must be >= 0")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _read_be32(data: bytes, offset: int, path) -> int:
    if offset + 4 > len(data):
        raise IdxParseError(f"{path}: truncated at byte {offset}")
    return struct.unpack(">I", data[offset:offset + 4])[0]


def load_idx_images(images_path, labels_path=None, limit: int | None = None,
                    normalize: bool = True):
    """Parse big-endian IDX images (and optional labels) into [0, 1] vectors.

    Returns a list of (flat float vector, label) pairs; labels are None when
    no label file is given.
    """
    with open(images_path, "rb") as fh:
        data = fh.read()
    magic = _read_be32(data, 0, images_path)
    if magic != IDX_IMAGES_MAGIC:
        raise IdxParseError(
            f"{images_path}: bad magic 0x{magic:08x} at byte 0, "
            f"expected 0x{IDX_IMAGES_MAGIC:08x}")
    count = _read_be32(data, 4, images_path)
    rows = _read_be32(data, 8, images_path)
    cols = _read_be32(data, 12, images_path)
    need = 16 + count * rows * cols
    if len(data) < need:
        raise IdxParseError(f"{images_path}: truncated at byte {len(data)}, "
                            f"expected {need} bytes")
    take = count if limit is None else min(limit, count)
    pixels = np.frombuffer(data, dtype=np.uint8, count=take * rows * cols,
                           offset=16)
    images = pixels.reshape(take, rows * cols).astype(float)
    if normalize:
        images = images / 255.0
    labels = [None] * take
    if labels_path is not None:
        with open(labels_path, "rb") as fh:
            ldata = fh.read()
        lmagic = _read_be32(ldata, 0, labels_path)
        if lmagic != IDX_LABELS_MAGIC:
            raise IdxParseError(
                f"{labels_path}: bad magic 0x{lmagic:08x} at byte 0, "
                f"expected 0x{IDX_LABELS_MAGIC:08x}")
        lcount = _read_be32(ldata, 4, labels_path)
        if len(ldata) < 8 + lcount:
            raise IdxParseError(f"{labels_path}: truncated at byte {len(ldata)}")
        if lcount < take:
            raise IdxParseError(f"{labels_path}: {lcount} labels for {take} images")
        labels = list(np.frombuffer(ldata, dtype=np.uint8, count=take, offset=8))
    return [(images[i], labels[i]) for i in range(take)]


@dataclass
class ExperimentRecord:
    image_id: int
    eta: float
    sigma: float
    repeat_index: int
    method: str
    psnr: float
    wall_ms: float
    seed: int
    converged: bool

    def sort_key(self):
        return (self.image_id, self.eta, -self.sigma, self.repeat_index,
                self.method)


def _fmt10(x: float) -> str:
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    if np.isnan(x):
        return "nan"
    return format(float(x), ".10g")


def _load_suite(cfg: ExperimentConfig):
    if cfg.dataset == "synthetic":
        net, images = synthetic.suite_images(cfg.image_count)
        return net, images, synthetic.SUITE_HEIGHT, synthetic.SUITE_WIDTH
    if cfg.generator is None:
        raise ValueError("IDX datasets need a generator weights path")
    net = load_weights(cfg.generator)
    pairs = load_idx_images(cfg.dataset, cfg.labels, cfg.image_count)
    images = [x for x, _ in pairs]
    side = int(round(np.sqrt(net.output_dim)))
    if side * side != net.output_dim:
        raise ValueError("generator output_dim is not a square image")
    if images and images[0].size != net.output_dim:
        raise ValueError(
            f"dataset images have {images[0].size} pixels but the generator "
            f"produces {net.output_dim}")
    return net, images, side, side


def _run_method(method: str, model: LinearModel, y, x_true, net, cfg, seed):
    """Returns (estimate, converged)."""
    if method == "l2":
        grid = np.logspace(-8.0, 2.0, cfg.lambda_grid_points)
        est, _ = l2_oracle(model.A, y, x_true, grid)
        return est, True
    if method == "latent":
        lp = LatentPosterior(model, net)
        est, diag = initial_map_estimate(lp, y, restarts=cfg.latent_restarts)
        return est, diag.converged
    if method == "laplace":
        return laplace_estimate(model, y, net,
                                restarts=cfg.latent_restarts).xhat, True
    if method == "guide":
        verdict = guide(model, y, net, seed=seed,
                        cross_validate=cfg.guide_cross_validate,
                        noiseless_virtual=cfg.guide_noiseless,
                        restarts=cfg.latent_restarts)
        return verdict.estimate, True
    raise ValueError(f"unknown method {method!r}")


def run_experiment(cfg: ExperimentConfig, output_dir=None):
    """Run the full sweep; returns the results CSV path.

    Every cell failure is recorded (psnr=nan, converged=false) and listed in
    the manifest; the sweep always continues.
    """
    import os

    out = output_dir if output_dir is not None else cfg.output_dir
    os.makedirs(out, exist_ok=True)
    net, images, height, width = _load_suite(cfg)
    blurs = {eta: build_blur(eta, height, width, cfg.radius)
             for eta in cfg.eta_list}
    records = []
    failures = []
    timings = {}
    for i, x in enumerate(images):
        for eta in cfg.eta_list:
            for s in cfg.sigma_exponents:
                sigma = 10.0 ** (-s)
                model = LinearModel(blurs[eta].matrix, sigma * sigma)
                for r in range(cfg.repeats):
                    cell_seed = rng.derive_seed(cfg.base_seed, i, eta, s, r)
                    y = observe(model, x, seed=cell_seed)
                    for method in cfg.methods:
                        t0 = time.perf_counter()
                        try:
                            est, conv = _run_method(method, model, y, x, net,
                                                    cfg, cell_seed)
                            score = psnr(x, est)
                        except Exception as exc:  # cell failure: record, move on
                            score, conv = float("nan"), False
                            failures.append({
                                "image_id": i, "eta": eta, "sigma": sigma,
                                "repeat": r, "method": method,
                                "error": f"{type(exc).__name__}: {exc}"})
                        wall = (time.perf_counter() - t0) * 1e3
                        timings[f"{i}/{eta}/{s}/{r}/{method}"] = wall
                        records.append(ExperimentRecord(
                            image_id=i, eta=eta, sigma=sigma, repeat_index=r,
                            method=method, psnr=score,
                            wall_ms=wall if cfg.timings_in_csv else 0.0,
                            seed=cell_seed, converged=conv))
    records.sort(key=ExperimentRecord.sort_key)
    csv_path = os.path.join(out, "results.csv")
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for rec in records:
            fh.write(",".join([
                str(rec.image_id), _fmt10(rec.eta), _fmt10(rec.sigma),
                str(rec.repeat_index), rec.method, _fmt10(rec.psnr),
                _fmt10(rec.wall_ms), str(rec.seed),
                "true" if rec.converged else "false"]) + "\n")
    manifest = {
        "version": __version__,
        "config": asdict(cfg),
        "record_count": len(records),
        "failures": failures,
        "wall_ms": timings,
    }
    with open(os.path.join(out, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True, default=list)
    return csv_path


def read_results(csv_path):
    """Parse a results CSV back into ExperimentRecord rows."""
    records = []
    with open(csv_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_COLUMNS:
            raise ValueError(f"{csv_path}:1: bad or missing header row")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(CSV_COLUMNS):
                raise ValueError(
                    f"{csv_path}:{lineno}: expected {len(CSV_COLUMNS)} fields, "
                    f"got {len(row)}")
            try:
                records.append(ExperimentRecord(
                    image_id=int(row[0]), eta=float(row[1]),
                    sigma=float(row[2]), repeat_index=int(row[3]),
                    method=row[4], psnr=float(row[5]), wall_ms=float(row[6]),
                    seed=int(row[7]), converged=row[8] == "true"))
            except ValueError as exc:
                raise ValueError(f"{csv_path}:{lineno}: {exc}") from exc
    return records


def summarize(records):
    """Mean/std/count of finite PSNR per (eta, sigma, method) cell."""
    cells = {}
    for rec in records:
        cells.setdefault((rec.eta, rec.sigma, rec.method), []).append(rec.psnr)
    out = {}
    for key, vals in cells.items():
        arr = np.asarray(vals)
        finite = arr[np.isfinite(arr)]
        out[key] = {
            "mean": float(np.mean(finite)) if finite.size else float("nan"),
            "std": float(np.std(finite)) if finite.size else float("nan"),
            "n": int(arr.size),
            "n_inf": int(np.sum(np.isposinf(arr))),
        }
    return out


def box_stats(values, label=""):
    """Five-number box summary with numpy's linear quantile interpolation.

    Whiskers extend to the most extreme points within 1.5 IQR of the box.
    """
    arr = np.sort(np.asarray(values, dtype=float))
    q1, med, q3 = np.percentile(arr, [25, 50, 75], method="linear")
    iqr = q3 - q1
    lo = arr[arr >= q1 - 1.5 * iqr]
    hi = arr[arr <= q3 + 1.5 * iqr]
    whislo = float(lo[0]) if lo.size else float(q1)
    whishi = float(hi[-1]) if hi.size else float(q3)
    fliers = arr[(arr < whislo) | (arr > whishi)]
    return {"label": label, "med": float(med), "q1": float(q1), "q3": float(q3),
            "whislo": whislo, "whishi": whishi, "fliers": fliers}


def report(csv_path, out_dir):
    """Render charts (SVG) and a text summary from a results CSV."""
    import os

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "genprior"

    os.makedirs(out_dir, exist_ok=True)
    records = read_results(csv_path)
    stats = summarize(records)
    etas = sorted({rec.eta for rec in records})
    methods = sorted({rec.method for rec in records})
    written = []

    for eta in etas:
        sigmas = sorted({rec.sigma for rec in records if rec.eta == eta},
                        reverse=True)
        xs = [-np.log10(sig) for sig in sigmas]
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for method in methods:
            means = [stats[(eta, sig, method)]["mean"]
                     for sig in sigmas if (eta, sig, method) in stats]
            if not means:
                continue
            ax.plot(xs[:len(means)], means, marker="o", label=method)
        ax.set_xlabel(r"$-\log_{10}\sigma$")
        ax.set_ylabel("mean PSNR [dB]")
        ax.set_title(f"blur precision eta = {eta:g}")
        ax.legend()
        fig.tight_layout()
        path = os.path.join(out_dir, f"psnr_vs_noise_eta{eta:g}.svg")
        fig.savefig(path, metadata={"Date": None})
        plt.close(fig)
        written.append(path)

        fig, ax = plt.subplots(figsize=(1.2 + 1.2 * len(sigmas) * len(methods) / 2,
                                        3.5))
        stats_list = []
        for sig in sigmas:
            for method in methods:
                vals = [rec.psnr for rec in records
                        if rec.eta == eta and rec.sigma == sig
                        and rec.method == method and np.isfinite(rec.psnr)]
                if vals:
                    label = f"{method}\n1e-{int(round(-np.log10(sig)))}"
                    stats_list.append(box_stats(vals, label=label))
        if stats_list:
            ax.bxp(stats_list)
            ax.set_ylabel("PSNR [dB]")
            ax.set_title(f"PSNR distributions, eta = {eta:g}")
            fig.tight_layout()
            path = os.path.join(out_dir, f"boxplot_eta{eta:g}.svg")
            fig.savefig(path, metadata={"Date": None})
            written.append(path)
        plt.close(fig)

    summary_path = os.path.join(out_dir, "summary.txt")
    with open(summary_path, "w", encoding="utf-8") as fh:
        fh.write(f"{'eta':>6} {'sigma':>10} {'method':>8} "
                 f"{'mean':>10} {'std':>10} {'n':>4} {'n_inf':>5}\n")
        for (eta, sig, method) in sorted(stats):
            cell = stats[(eta, sig, method)]
            fh.write(f"{eta:6g} {sig:10.3e} {method:>8} "
                     f"{cell['mean']:10.4f} {cell['std']:10.4f} "
                     f"{cell['n']:4d} {cell['n_inf']:5d}\n")
    written.append(summary_path)
    return written
