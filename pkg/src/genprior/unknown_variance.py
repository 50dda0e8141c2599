"""Unknown noise variance via an Inverse-Gamma prior, marginalized analytically.

With an IG(alpha, beta) prior on sigma^2, integrating the variance out of
the joint turns the Gaussian likelihood factor into a Student-like bracket
{||residual||^2 + beta}^{-(n + 2 alpha)/2}. Both the latent-space and the
(Laplace-approximated) variable-space marginal posteriors keep this form;
no closed-form Gaussian posterior exists in the variable space, so this
module ships log densities and a quasi-Newton MAP only.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import generator, optimize
from .generator import GeneratorNet
from .laplace_inference import LaplacePrior
from .linalg import chol_factor


@dataclass(frozen=True)
class IGPrior:
    """Inverse-Gamma hyperparameters; the defaults are a weak, wide prior."""

    alpha: float = 1.0
    beta: float = 1e-4

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("alpha and beta must be positive")


def marginal_latent_log_density(net: GeneratorNet, A: np.ndarray, y: np.ndarray,
                                ig: IGPrior, z: np.ndarray) -> float:
    """-(n + 2 alpha)/2 * log(||A g(z) - y||^2 + beta) - ||z||^2 / 2."""
    A = np.asarray(A, dtype=float)
    r = A @ generator.g_mean(net, z) - y
    n = A.shape[0]
    return float(-(n + 2.0 * ig.alpha) / 2.0 * np.log(r @ r + ig.beta)
                 - 0.5 * float(np.asarray(z) @ np.asarray(z)))


def marginal_variable_log_density(A: np.ndarray, y: np.ndarray, ig: IGPrior,
                                  prior: LaplacePrior, x: np.ndarray) -> float:
    """Variable-space marginal with the Laplace prior standing in for pi(x)."""
    A = np.asarray(A, dtype=float)
    x = np.asarray(x, dtype=float)
    r = A @ x - y
    n = A.shape[0]
    bracket = -(n + 2.0 * ig.alpha) / 2.0 * np.log(r @ r + ig.beta)
    from .linalg import gaussian_logpdf

    return float(bracket + gaussian_logpdf(x, prior.mean, prior.cov))


def marginal_variable_map(A: np.ndarray, y: np.ndarray, ig: IGPrior,
                          prior: LaplacePrior, x_init: np.ndarray,
                          gtol: float = 1e-8, max_iter: int = 500):
    """Quasi-Newton MAP of the variable-space marginal, analytic gradient.

    Returns (x_map, diagnostics); non-convergence is flagged, not raised.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    c = n + 2.0 * ig.alpha
    L = chol_factor(prior.cov)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))

    def f_and_g(x):
        r = A @ x - y
        ss = float(r @ r) + ig.beta
        dx = x - prior.mean
        w = scipy.linalg.solve_triangular(L, dx, lower=True)
        prior_grad = scipy.linalg.solve_triangular(L.T, w, lower=False)
        val = (-0.5 * c * np.log(ss)
               - 0.5 * (w @ w + logdet + x.size * np.log(2.0 * np.pi)))
        grad = -c * (A.T @ r) / ss - prior_grad
        return val, grad

    res = optimize.maximize(f_and_g, np.asarray(x_init, float),
                            gtol=gtol, max_iter=max_iter)
    return res.x, res
