"""Brute-force evaluation of the intractable generator prior and posterior.

The prior pi(x) = integral of N(x | g(z), Gamma(z)) dN(z | 0, I) has no
closed form for nonlinear g. This module estimates its log value by plain
Monte Carlo over z (valid because the standard normal is the mixing
measure), and estimates exact variable-space posterior moments by
self-normalized importance sampling with the Laplace posterior as proposal.
Prior values inside the posterior weights are themselves estimated with
fresh z batches per sample (a pseudo-marginal scheme, consistent for any
batch size). Everything here is desk-scale machinery for certifying the
analytic modules at small d; it is not meant to scale.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import logsumexp

from . import generator, rng
from .forward_model import LinearModel
from .generator import GeneratorNet
from .linalg import chol_factor


@dataclass(frozen=True)
class PriorEstimate:
    log_value: float
    std_error: float
    n_samples: int


@dataclass(frozen=True)
class PosteriorMoments:
    mean: np.ndarray
    cov: np.ndarray
    mean_std_error: np.ndarray
    ess: float
    low_ess_warning: bool
    n_samples: int


def _conditional_logpdfs(net: GeneratorNet, x: np.ndarray,
                         zs: np.ndarray) -> np.ndarray:
    """log N(x | g(z_i), Gamma(z_i)) for a batch of latent points."""
    d = net.output_dim
    means = generator.g_mean(net, zs)
    r = x[None, :] - means
    variant = net.cov_head.variant
    raw = generator.forward(net.cov_head.layers, zs)
    eps = net.cov_head.eps_gamma
    if variant == "isotropic":
        v = np.logaddexp(0.0, raw[:, 0]) + eps
        return -0.5 * (d * np.log(2.0 * np.pi * v) + np.sum(r * r, axis=1) / v)
    if variant == "diagonal":
        gam = np.logaddexp(0.0, raw) + eps
        return -0.5 * (d * np.log(2.0 * np.pi) + np.sum(np.log(gam), axis=1)
                       + np.sum(r * r / gam, axis=1))
    out = np.empty(zs.shape[0])
    for i in range(zs.shape[0]):
        L = np.zeros((d, d))
        L[np.tril_indices(d)] = raw[i]
        cov = L @ L.T + eps * np.eye(d)
        Lc = chol_factor(cov)
        w = scipy.linalg.solve_triangular(Lc, r[i], lower=True)
        out[i] = -0.5 * (w @ w + 2.0 * np.sum(np.log(np.diag(Lc)))
                         + d * np.log(2.0 * np.pi))
    return out


def mc_log_prior(net: GeneratorNet, x: np.ndarray, n_samples: int,
                 seed: int) -> PriorEstimate:
    """log of the Monte-Carlo prior estimate with a delta-method standard error."""
    if n_samples < 100:
        raise ValueError("n_samples must be >= 100")
    x = np.asarray(x, dtype=float)
    zs = rng.stream(seed).standard_normal((n_samples, net.latent_dim))
    logs = _conditional_logpdfs(net, x, zs)
    l1 = float(logsumexp(logs) - np.log(n_samples))
    l2 = float(logsumexp(2.0 * logs) - np.log(n_samples))
    ratio = max(np.exp(l2 - 2.0 * l1) - 1.0, 0.0)
    return PriorEstimate(log_value=l1,
                         std_error=float(np.sqrt(ratio / n_samples)),
                         n_samples=n_samples)


def mc_posterior_moments(model: LinearModel, y: np.ndarray, net: GeneratorNet,
                         n_samples: int, seed: int,
                         prior_batch: int = 128) -> PosteriorMoments:
    """Importance-sampled mean/covariance of the exact variable-space posterior.

    Proposal is the closed-form Laplace posterior for the same (y, net).
    Intended for d <= 10; an effective sample size below 50 sets the
    warning flag on the result.
    """
    from .laplace_inference import laplace_estimate

    gen = rng.stream(seed)
    post = laplace_estimate(model, y, net)
    Lp = chol_factor(post.Shat)
    xs = post.xhat[None, :] + gen.standard_normal((n_samples, model.d)) @ Lp.T

    # Proposal log density.
    diffs = xs - post.xhat[None, :]
    wsolve = scipy.linalg.solve_triangular(Lp, diffs.T, lower=True)
    log_q = -0.5 * (np.sum(wsolve * wsolve, axis=0)
                    + 2.0 * np.sum(np.log(np.diag(Lp)))
                    + model.d * np.log(2.0 * np.pi))

    # Likelihood log density.
    res = xs @ model.A.T - y[None, :]
    log_lik = -0.5 * (np.sum(res * res, axis=1) / model.sigma2
                      + model.n * np.log(2.0 * np.pi * model.sigma2))

    # Pseudo-marginal prior estimate: one fresh z batch per sample.
    zs = gen.standard_normal((n_samples, prior_batch, net.latent_dim))
    log_prior = np.empty(n_samples)
    for i in range(n_samples):
        logs = _conditional_logpdfs(net, xs[i], zs[i])
        log_prior[i] = logsumexp(logs) - np.log(prior_batch)

    log_w = log_lik + log_prior - log_q
    log_w -= logsumexp(log_w)
    w = np.exp(log_w)
    mean = w @ xs
    centered = xs - mean[None, :]
    cov = (centered * w[:, None]).T @ centered
    ess = float(1.0 / np.sum(w * w))
    se = np.sqrt(np.sum((w[:, None] * centered) ** 2, axis=0))
    return PosteriorMoments(mean=mean, cov=0.5 * (cov + cov.T),
                            mean_std_error=se, ess=ess,
                            low_ess_warning=bool(ess < 50.0),
                            n_samples=n_samples)
