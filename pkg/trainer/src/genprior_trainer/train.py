"""Two-stage training: ELBO for the mean paths, then the covariance head.

Stage 1 optimizes the standard ELBO with a fixed reconstruction variance for
the encoder and decoder mean. Stage 2 freezes both and fits the diagonal
covariance head by maximizing the Gaussian likelihood under the encoder's
posterior samples, mirroring how the consumer interprets the head.
"""

import time
from dataclasses import dataclass, field

import numpy as np
import torch

from .model import DenseVAE, elbo_terms


@dataclass
class TrainerConfig:
    latent_dim: int = 20
    hidden: int = 256
    epochs: int = 20
    transfer_epochs: int = 5
    batch_size: int = 512
    learning_rate: float = 1e-3
    transfer_learning_rate: float = 1e-2  # linear head; converges fast
    recon_var: float = 0.05
    eps_gamma: float = 1e-4
    seed: int = 0
    out: str = "weights.json"

    def __post_init__(self):
        for name in ("latent_dim", "hidden", "epochs", "batch_size"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.transfer_epochs < 0:
            raise ValueError("transfer_epochs must be >= 0")
        if self.learning_rate <= 0 or self.transfer_learning_rate <= 0:
            raise ValueError("learning rates must be positive")


@dataclass
class TrainingReport:
    elbo_curve: list = field(default_factory=list)
    cov_curve: list = field(default_factory=list)
    wall_s: float = 0.0


def _batches(images: torch.Tensor, batch_size: int, generator: torch.Generator):
    perm = torch.randperm(images.shape[0], generator=generator)
    for k in range(0, images.shape[0], batch_size):
        yield images[perm[k:k + batch_size]]


def train(images: np.ndarray, cfg: TrainerConfig):
    """Train on (n, d) float images in [0, 1]; returns (model, report)."""
    t0 = time.time()
    torch.manual_seed(cfg.seed)
    gen = torch.Generator().manual_seed(cfg.seed)
    data = torch.as_tensor(np.asarray(images, dtype=np.float32))
    model = DenseVAE(data_dim=data.shape[1], latent_dim=cfg.latent_dim,
                     hidden=cfg.hidden, eps_gamma=cfg.eps_gamma)
    report = TrainingReport()

    mean_params = [p for name, p in model.named_parameters()
                   if not name.startswith("cov_raw")]
    opt = torch.optim.Adam(mean_params, lr=cfg.learning_rate)
    for _ in range(cfg.epochs):
        total, count = 0.0, 0
        for batch in _batches(data, cfg.batch_size, gen):
            opt.zero_grad()
            recon, kl = elbo_terms(model, batch, generator=gen,
                                   recon_var=cfg.recon_var)
            loss = recon + kl
            loss.backward()
            opt.step()
            total += float(loss.detach()) * batch.shape[0]
            count += batch.shape[0]
        report.elbo_curve.append(-total / count)

    for p in mean_params:
        p.requires_grad_(False)
    opt2 = torch.optim.Adam(model.cov_raw.parameters(),
                            lr=cfg.transfer_learning_rate)
    for _ in range(cfg.transfer_epochs):
        total, count = 0.0, 0
        for batch in _batches(data, cfg.batch_size, gen):
            opt2.zero_grad()
            recon, kl = elbo_terms(model, batch, generator=gen,
                                   learn_cov=True)
            loss = recon + kl
            loss.backward()
            opt2.step()
            total += float(loss.detach()) * batch.shape[0]
            count += batch.shape[0]
        report.cov_curve.append(-total / count)

    model.eval()
    report.wall_s = time.time() - t0
    return model, report


def reconstruction_psnr(model: DenseVAE, images: np.ndarray) -> float:
    """Mean PSNR of deterministic autoencoding over the given images."""
    with torch.no_grad():
        x = torch.as_tensor(np.asarray(images, dtype=np.float32))
        mu, _ = model.encode(x)
        rec = model.decode_mean(mu).numpy()
    mse = np.mean((np.asarray(images) - rec) ** 2, axis=1)
    mse = np.maximum(mse, 1e-300)
    return float(np.mean(-10.0 * np.log10(mse)))


def constant_baseline_psnr(train_images: np.ndarray,
                           test_images: np.ndarray) -> float:
    """PSNR of always predicting the training-set mean image."""
    mean_img = np.mean(np.asarray(train_images), axis=0)
    mse = np.mean((np.asarray(test_images) - mean_img[None, :]) ** 2, axis=1)
    mse = np.maximum(mse, 1e-300)
    return float(np.mean(-10.0 * np.log10(mse)))
