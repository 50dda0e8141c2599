"""Inference in latent space.

Models the data as y | z ~ N(A g(z), sigma^2 I) with a standard normal prior
on z, which restricts estimates to the generator's image manifold. Provides
the unnormalized log posterior and its analytic gradient, a quasi-Newton MAP,
the push-forward estimate g(z_MAP), a random-walk posterior-mean sampler and
the asymptotic push-forward covariance.
"""

from dataclasses import dataclass

import numpy as np

from . import generator, optimize, rng
from .forward_model import LinearModel
from .generator import GeneratorNet
from .linalg import sym


@dataclass(frozen=True)
class LatentPosterior:
    """Unnormalized posterior over z given y (mean map of the net only)."""

    model: LinearModel
    net: GeneratorNet


def latent_log_density(lp: LatentPosterior, z: np.ndarray, y: np.ndarray) -> float:
    """-||A g(z) - y||^2 / (2 sigma^2) - ||z||^2 / 2, constant dropped."""
    r = lp.model.A @ generator.g_mean(lp.net, z) - y
    return float(-(r @ r) / (2.0 * lp.model.sigma2) - 0.5 * float(z @ z))


def latent_log_density_grad(lp: LatentPosterior, z: np.ndarray,
                            y: np.ndarray) -> np.ndarray:
    """Analytic gradient: -sigma^-2 J^T A^T (A g(z) - y) - z."""
    g, J = generator.forward_with_jacobian(lp.net.mean_layers, np.asarray(z, float))
    r = lp.model.A @ g - y
    return -(J.T @ (lp.model.A.T @ r)) / lp.model.sigma2 - z


def latent_map(lp: LatentPosterior, y: np.ndarray, z_init: np.ndarray,
               gtol: float = 1e-8, max_iter: int = 500):
    """Quasi-Newton MAP of the latent posterior.

    Non-convergence is reported through the diagnostics (the landscape is
    nonconvex and local optima are expected), never raised.
    """

    def f_and_g(z):
        return latent_log_density(lp, z, y), latent_log_density_grad(lp, z, y)

    res = optimize.maximize(f_and_g, np.asarray(z_init, float),
                            gtol=gtol, max_iter=max_iter)
    return res.x, res


def initial_map_estimate(lp: LatentPosterior, y: np.ndarray,
                         z_init: np.ndarray | None = None, restarts: int = 0):
    """latent_estimate plus the optimizer diagnostics: returns (g(z_MAP), diag)."""
    if z_init is None:
        from .laplace_inference import initial_latent_point

        _, z_init = initial_latent_point(lp.model, y, lp.net, restarts=restarts)
    z_map, diag = latent_map(lp, y, z_init)
    return generator.g_mean(lp.net, z_map), diag


def latent_estimate(lp: LatentPosterior, y: np.ndarray,
                    z_init: np.ndarray | None = None,
                    restarts: int = 0) -> np.ndarray:
    """g(z_MAP) with the least-squares + encoder initialization recipe.

    When ``z_init`` is given it overrides the recipe. Without an encoder the
    recipe falls back to a numerical latent search started at the origin
    (plus ``restarts`` seeded restarts).
    """
    est, _ = initial_map_estimate(lp, y, z_init=z_init, restarts=restarts)
    return est


def sample_latent_posterior(lp: LatentPosterior, y: np.ndarray, n_samples: int,
                            seed: int, z_init: np.ndarray | None = None) -> np.ndarray:
    """Random-walk Metropolis chain targeting the latent posterior.

    Burn-in is n_samples // 5; during burn-in the proposal scale adapts
    toward ~25% acceptance. Returns the (n_samples, p) retained states.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    p = lp.net.latent_dim
    gen = rng.stream(seed)
    z = np.zeros(p) if z_init is None else np.asarray(z_init, float).copy()
    logp = latent_log_density(lp, z, y)
    burn = n_samples // 5
    scale = 2.38 / np.sqrt(p)
    out = np.empty((n_samples, p))
    for it in range(burn + n_samples):
        prop = z + scale * gen.standard_normal(p)
        logp_prop = latent_log_density(lp, prop, y)
        accept = np.log(gen.uniform()) < logp_prop - logp
        if accept:
            z, logp = prop, logp_prop
        if it < burn:
            scale *= np.exp(0.05 * ((1.0 if accept else 0.0) - 0.25))
        else:
            out[it - burn] = z
    return out


def latent_posterior_mean(lp: LatentPosterior, y: np.ndarray, n_samples: int,
                          seed: int, z_init: np.ndarray | None = None) -> np.ndarray:
    """Monte-Carlo posterior mean of the push-forward: average of g over the chain."""
    zs = sample_latent_posterior(lp, y, n_samples, seed, z_init=z_init)
    return generator.g_mean(lp.net, zs).mean(axis=0)


def latent_asymptotic_cov(net: GeneratorNet, A: np.ndarray, sigma2: float,
                          z_star: np.ndarray) -> np.ndarray:
    """Asymptotic push-forward covariance J (sigma^-2 J^T A^T A J)^-1 J^T.

    Symmetric positive semidefinite with rank at most p. Raises when the
    inner Fisher matrix is singular (model not identifiable at z_star).
    """
    J = generator.jacobian(net, np.asarray(z_star, float))
    AJ = np.asarray(A, float) @ J
    F = sym(AJ.T @ AJ) / float(sigma2)
    w = np.linalg.eigvalsh(F)
    if w[0] <= max(w[-1], 1.0) * 1e-12:
        raise np.linalg.LinAlgError(
            "Fisher information singular at z_star; model not identifiable there")
    C = J @ np.linalg.solve(F, J.T)
    return sym(C)
