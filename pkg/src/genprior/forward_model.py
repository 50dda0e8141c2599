"""Linear Gaussian sampling model, blur operators, and reconstruction scoring.

The data model is y | x ~ N(Ax, sigma^2 I) with A an n-by-d full-rank matrix.
This module builds the Gaussian blur realization of A used in the deblurring
experiments, synthesizes seeded observations, and scores reconstructions by
PSNR.
"""

from dataclasses import dataclass, field

import numpy as np

from . import rng


@dataclass(frozen=True)
class LinearModel:
    """Observation operator A with homoscedastic noise variance sigma2.

    Requires n >= d and full column rank; the rank check runs once at
    construction via SVD and the condition number is kept for diagnostics.
    """

    A: np.ndarray
    sigma2: float
    condition: float = field(init=False)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        object.__setattr__(self, "A", A)
        if A.ndim != 2:
            raise ValueError("A must be a 2-d matrix")
        n, d = A.shape
        if n < d:
            raise ValueError(f"need n >= d, got n={n}, d={d}")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        s = np.linalg.svd(A, compute_uv=False)
        if s[-1] <= s[0] * np.finfo(float).eps * max(n, d):
            raise ValueError("A is rank deficient")
        object.__setattr__(self, "condition", float(s[0] / s[-1]))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.A.shape[1]

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.sigma2))


@dataclass(frozen=True)
class BlurOperator:
    """Dense realization of a truncated, row-renormalized Gaussian blur.

    eta is the kernel precision (larger = sharper), radius the truncation in
    pixels. Every row of the matrix sums to one: constant images are fixed
    points. Near image borders the truncated window is renormalized per
    output pixel, so the operator is not exactly mass preserving for images
    with support within ``2 * radius`` of the border.
    """

    eta: float
    radius: int
    height: int
    width: int
    matrix: np.ndarray

    @property
    def d(self) -> int:
        return self.height * self.width

    def apply_kernel(self, image: np.ndarray) -> np.ndarray:
        """Direct kernel convolution of a flat image (oracle for ``matrix``)."""
        img = np.asarray(image, dtype=float).reshape(self.height, self.width)
        ker = _kernel(self.eta, self.radius)
        r = self.radius
        out = np.zeros_like(img)
        for i in range(self.height):
            for j in range(self.width):
                i0, i1 = max(0, i - r), min(self.height, i + r + 1)
                j0, j1 = max(0, j - r), min(self.width, j + r + 1)
                win = ker[i0 - i + r : i1 - i + r, j0 - j + r : j1 - j + r]
                out[i, j] = np.sum(win * img[i0:i1, j0:j1]) / np.sum(win)
        return out.ravel()


def _kernel(eta: float, radius: int) -> np.ndarray:
    offs = np.arange(-radius, radius + 1, dtype=float)
    return np.exp(-eta * (offs[:, None] ** 2 + offs[None, :] ** 2) / 2.0)


def build_blur(eta: float, height: int, width: int, radius: int = 4) -> BlurOperator:
    """Dense d-by-d Gaussian blur with weights exp(-eta (u^2+v^2) / 2).

    The window is |u|, |v| <= radius and each output row is renormalized to
    sum to one (exact at borders as well).
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    if radius < 1:
        raise ValueError("radius must be >= 1")
    if height < 1 or width < 1:
        raise ValueError("image dimensions must be positive")
    d = height * width
    ker = _kernel(eta, radius)
    matrix = np.zeros((d, d))
    # One pass per kernel offset: scatter w(u,v) onto the (out, in) diagonal
    # band it feeds, then renormalize rows.
    rows = np.arange(height)
    cols = np.arange(width)
    for u in range(-radius, radius + 1):
        iin = rows + u
        ok_i = (iin >= 0) & (iin < height)
        for v in range(-radius, radius + 1):
            jin = cols + v
            ok_j = (jin >= 0) & (jin < width)
            w = ker[u + radius, v + radius]
            ii = rows[ok_i]
            jj = cols[ok_j]
            out_idx = (ii[:, None] * width + jj[None, :]).ravel()
            in_idx = ((ii[:, None] + u) * width + (jj[None, :] + v)).ravel()
            matrix[out_idx, in_idx] += w
    matrix /= matrix.sum(axis=1, keepdims=True)
    return BlurOperator(eta=float(eta), radius=int(radius), height=int(height),
                        width=int(width), matrix=matrix)


def observe(model: LinearModel, x: np.ndarray, seed: int,
            sigma: float | None = None) -> np.ndarray:
    """Draw y = Ax + sigma * eps with eps i.i.d. standard normal.

    ``sigma`` overrides the model's noise level; sigma = 0 is allowed here
    (and only here) to produce noiseless data.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    s = model.sigma if sigma is None else float(sigma)
    y = model.A @ x
    if s != 0.0:
        y = y + s * rng.normal(seed, model.n)
    return y


def psnr(x: np.ndarray, xhat: np.ndarray, L: float = 1.0) -> float:
    """20 log10(L) - 10 log10(||x - xhat||^2 / d); +inf at zero error."""
    x = np.asarray(x, dtype=float)
    xhat = np.asarray(xhat, dtype=float)
    if x.shape != xhat.shape:
        raise ValueError("shape mismatch")
    mse = float(np.sum((x - xhat) ** 2)) / x.size
    if mse == 0.0:
        return float("inf")
    return float(20.0 * np.log10(L) - 10.0 * np.log10(mse))
