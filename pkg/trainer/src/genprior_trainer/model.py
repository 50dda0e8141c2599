"""Dense VAE with smooth activations and a diagonal covariance head.

The architecture uses dense layers only (tanh/sigmoid, both smooth) so the
trained decoder is exactly representable in the portable weights format and
its Jacobian exists everywhere. The covariance head shares the consumer's
parametrization, variance = softplus(raw) + eps_gamma, so raw weights can be
exported without conversion.
"""

import numpy as np
import torch
from torch import nn


class DenseVAE(nn.Module):
    def __init__(self, data_dim: int = 784, latent_dim: int = 20,
                 hidden: int = 256, eps_gamma: float = 1e-4):
        super().__init__()
        self.data_dim = data_dim
        self.latent_dim = latent_dim
        self.hidden = hidden
        self.eps_gamma = eps_gamma

        self.enc_hidden = nn.Linear(data_dim, hidden)
        self.enc_mu = nn.Linear(hidden, latent_dim)
        self.enc_logvar = nn.Linear(hidden, latent_dim)

        self.dec_hidden = nn.Linear(latent_dim, hidden)
        self.dec_out = nn.Linear(hidden, data_dim)

        # raw covariance parameters; consumer applies softplus + floor.
        # Initialized to a constant small variance (~0.05) so freshly
        # initialized or lightly trained models already generate sanely.
        self.cov_raw = nn.Linear(latent_dim, data_dim)
        nn.init.zeros_(self.cov_raw.weight)
        nn.init.constant_(self.cov_raw.bias, float(np.log(np.expm1(0.05))))

    def encode(self, x):
        h = torch.tanh(self.enc_hidden(x))
        return self.enc_mu(h), self.enc_logvar(h)

    def decode_mean(self, z):
        h = torch.tanh(self.dec_hidden(z))
        return torch.sigmoid(self.dec_out(h))

    def decode_var(self, z):
        return torch.nn.functional.softplus(self.cov_raw(z)) + self.eps_gamma

    def reparameterize(self, mu, logvar, generator=None):
        std = torch.exp(0.5 * logvar)
        eps = torch.randn(mu.shape, generator=generator, dtype=mu.dtype,
                          device=mu.device)
        return mu + eps * std

    def forward(self, x, generator=None):
        mu, logvar = self.encode(x)
        z = self.reparameterize(mu, logvar, generator=generator)
        return self.decode_mean(z), mu, logvar, z


def elbo_terms(model: DenseVAE, x, generator=None, recon_var: float = 0.05,
               learn_cov: bool = False):
    """Negative ELBO split into reconstruction and KL parts (per-sample mean).

    Stage 1 uses a fixed isotropic reconstruction variance; stage 2
    (learn_cov) evaluates the Gaussian likelihood under the covariance head.
    """
    mu, logvar = model.encode(x)
    z = model.reparameterize(mu, logvar, generator=generator)
    mean = model.decode_mean(z)
    if learn_cov:
        var = model.decode_var(z)
        recon = 0.5 * torch.sum((x - mean) ** 2 / var + torch.log(var), dim=1)
    else:
        recon = 0.5 * torch.sum((x - mean) ** 2, dim=1) / recon_var
    kl = -0.5 * torch.sum(1 + logvar - mu**2 - torch.exp(logvar), dim=1)
    return recon.mean(), kl.mean()
