"""Shared dense linear algebra: symmetrized Cholesky solves with jitter.

Every d-by-d solve in the package goes through these helpers. Matrices are
explicitly symmetrized before factorization, and when a factorization fails
a diagonal jitter of 1e-12 * trace/d is added and escalated by factors of 10
up to 1e-6 * trace/d before giving up. The likelihood precision sigma^-2 A^T A
is severely ill-conditioned at small noise levels, and this policy keeps the
solves stable without ever forming an explicit inverse through the normal
equations twice.
"""

import numpy as np
import scipy.linalg

JITTER_INITIAL = 1e-12
JITTER_MAX = 1e-6


class FactorizationError(np.linalg.LinAlgError):
    """Raised when a matrix stays indefinite after jitter escalation."""


def sym(m: np.ndarray) -> np.ndarray:
    """Symmetrize: (M + M^T) / 2."""
    return 0.5 * (m + m.T)


def chol_factor(m: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of the symmetrized input, with jitter escalation."""
    a = sym(np.asarray(m, dtype=float))
    d = a.shape[0]
    scale = np.trace(a) / d if d else 1.0
    if scale <= 0 or not np.isfinite(scale):
        scale = 1.0
    jitter = 0.0
    while True:
        try:
            return np.linalg.cholesky(a + jitter * np.eye(d))
        except np.linalg.LinAlgError:
            jitter = JITTER_INITIAL * scale if jitter == 0.0 else jitter * 10.0
            if jitter > JITTER_MAX * scale:
                raise FactorizationError(
                    f"matrix not positive definite after jitter escalation "
                    f"(scale={scale:.3e})"
                )


def chol_solve(m: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve M x = b with M symmetric positive definite."""
    L = chol_factor(m)
    y = scipy.linalg.solve_triangular(L, b, lower=True)
    return scipy.linalg.solve_triangular(L.T, y, lower=False)


def chol_inverse(m: np.ndarray) -> np.ndarray:
    """Symmetric positive definite inverse via Cholesky (solved against I)."""
    inv = chol_solve(m, np.eye(m.shape[0]))
    return sym(inv)


def chol_logdet(m: np.ndarray) -> float:
    """log det of a symmetric positive definite matrix."""
    L = chol_factor(m)
    return float(2.0 * np.sum(np.log(np.diag(L))))


def gaussian_logpdf(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> float:
    """Log density of N(x | mean, cov) for a full covariance."""
    x = np.asarray(x, dtype=float)
    r = x - mean
    d = x.shape[0]
    L = chol_factor(cov)
    w = scipy.linalg.solve_triangular(L, r, lower=True)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return float(-0.5 * (w @ w + logdet + d * np.log(2.0 * np.pi)))
