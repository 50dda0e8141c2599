"""Bundled synthetic generators and test instances.

Everything here is deterministic given the recorded seeds, so the full
acceptance suite runs without MNIST or a trained network. Two constructions
carry most of the weight:

* affine nets (optionally with an exact linear encoder) for closed-form
  conjugate oracles, and
* tanh nets, whose outputs lie in the affine subspace b2 + range(W2); a
  ground truth displaced from that subspace along an orthonormal complement
  direction has an exactly certified distance-to-manifold, which the
  consistency tests rely on.
"""

from dataclasses import dataclass

import numpy as np

from .forward_model import build_blur
from .generator import Activation, CovHead, Dense, GeneratorNet


def inverse_softplus(v: float) -> float:
    """Raw value r with softplus(r) = v (v > 0)."""
    return float(np.log(np.expm1(v)))


def constant_cov_head(variant: str, latent_dim: int, d: int, value,
                      eps_gamma: float = 1e-4) -> CovHead:
    """Covariance head that ignores z: zero weights, bias chosen so the
    resulting variance(s) equal ``value`` (+ eps_gamma floor already counted)."""
    if variant == "isotropic":
        raw_dim = 1
        bias = np.array([inverse_softplus(float(value) - eps_gamma)])
    elif variant == "diagonal":
        raw_dim = d
        vals = np.full(d, float(value)) if np.isscalar(value) else np.asarray(value, float)
        bias = np.array([inverse_softplus(v - eps_gamma) for v in vals])
    else:
        raise ValueError("constant_cov_head supports isotropic/diagonal only")
    return CovHead(variant=variant, eps_gamma=eps_gamma,
                   layers=(Dense(W=np.zeros((raw_dim, latent_dim)), b=bias),))


def affine_net(seed: int, p: int, d: int, gamma_value: float = 0.05,
               with_encoder: bool = True, cov_variant: str = "isotropic",
               eps_gamma: float = 1e-4) -> GeneratorNet:
    """Affine generator g(z) = W z + b with constant covariance.

    The encoder, when present, is the least-squares inverse f(x) =
    W^+ (x - b); it is deliberately not the joint-integrand maximizer, so
    the expansion-point update has a nontrivial first step.
    """
    gen = np.random.default_rng(seed)
    W = gen.standard_normal((d, p)) / np.sqrt(p)
    b = 0.5 * gen.standard_normal(d)
    encoder = None
    if with_encoder:
        Wp = np.linalg.pinv(W)
        encoder = (Dense(W=Wp, b=-Wp @ b),)
    return GeneratorNet(
        latent_dim=p, output_dim=d,
        mean_layers=(Dense(W=W, b=b),),
        cov_head=constant_cov_head(cov_variant, p, d, gamma_value, eps_gamma),
        encoder=encoder,
    )


def tanh_net(seed: int, p: int, d: int, hidden: int, out_scale: float = 1.0,
             gamma_value: float = 0.01, cov_variant: str = "isotropic",
             cov_wiggle: float = 0.0, eps_gamma: float = 1e-4) -> GeneratorNet:
    """Two-layer tanh generator g(z) = b2 + out_scale * W2 tanh(W1 z + b1).

    ``cov_wiggle`` > 0 adds small z-dependent weights to the covariance
    head so Gamma(z) genuinely varies.
    """
    gen = np.random.default_rng(seed)
    W1 = gen.standard_normal((hidden, p)) / np.sqrt(p)
    b1 = 0.3 * gen.standard_normal(hidden)
    W2 = out_scale * gen.standard_normal((d, hidden)) / np.sqrt(hidden)
    b2 = 0.5 + 0.1 * gen.standard_normal(d)
    head = constant_cov_head(cov_variant, p, d, gamma_value, eps_gamma)
    if cov_wiggle > 0.0:
        dense = head.layers[0]
        W = cov_wiggle * gen.standard_normal(dense.W.shape)
        head = CovHead(variant=head.variant, eps_gamma=head.eps_gamma,
                       layers=(Dense(W=W, b=dense.b),))
    return GeneratorNet(
        latent_dim=p, output_dim=d,
        mean_layers=(Dense(W=W1, b=b1), Activation("tanh"), Dense(W=W2, b=b2)),
        cov_head=head,
    )


def offmanifold_direction(net: GeneratorNet, seed: int = 0) -> np.ndarray:
    """Unit vector orthogonal to the output subspace of a tanh net.

    The generator mean lies in b2 + range(W2) (final layer affine), so any
    x displaced along this direction by c has min_z ||x - g(z)|| >= c.
    """
    final = net.mean_layers[-1]
    if not isinstance(final, Dense):
        raise ValueError("net must end in a dense layer")
    W2 = final.W
    d, h = W2.shape
    if h >= d:
        raise ValueError("output layer has full row rank; no orthogonal direction")
    U, s, _ = np.linalg.svd(W2, full_matrices=True)
    null_basis = U[:, h:]
    gen = np.random.default_rng(seed)
    coeffs = gen.standard_normal(null_basis.shape[1])
    u = null_basis @ coeffs
    return u / np.linalg.norm(u)


@dataclass(frozen=True)
class OffManifoldInstance:
    net: GeneratorNet
    x_true: np.ndarray
    delta: float
    z_anchor: np.ndarray
    direction: np.ndarray


def off_manifold_instance(d: int = 8, p: int = 2, hidden: int = 4,
                          delta: float = 0.5, seed: int = 20) -> OffManifoldInstance:
    """Small tanh net plus a truth at certified distance >= delta from its range."""
    net = tanh_net(seed, p=p, d=d, hidden=hidden, out_scale=1.0,
                   gamma_value=0.02)
    gen = np.random.default_rng(seed + 1)
    z_anchor = gen.standard_normal(p) * 0.5
    from .generator import g_mean

    u = offmanifold_direction(net, seed=seed + 2)
    x = g_mean(net, z_anchor) + delta * u
    return OffManifoldInstance(net=net, x_true=x, delta=delta,
                               z_anchor=z_anchor, direction=u)


@dataclass(frozen=True)
class OnManifoldInstance:
    net: GeneratorNet
    x_true: np.ndarray
    z_true: np.ndarray


def on_manifold_instance(d: int = 8, p: int = 2, hidden: int = 4,
                         seed: int = 21) -> OnManifoldInstance:
    net = tanh_net(seed, p=p, d=d, hidden=hidden, gamma_value=0.02)
    gen = np.random.default_rng(seed + 1)
    z = gen.standard_normal(p) * 0.5
    from .generator import g_mean

    return OnManifoldInstance(net=net, x_true=g_mean(net, z), z_true=z)


def tanh3_instance(seed: int = 7) -> GeneratorNet:
    """The 2-latent / 3-output tanh net used by the Monte-Carlo oracle checks."""
    return tanh_net(seed, p=2, d=3, hidden=3, out_scale=0.8, gamma_value=0.05,
                    cov_variant="diagonal", cov_wiggle=0.3)


def remark_instance(seed: int = 5):
    """Instance where the difference of asymptotic covariances is indefinite.

    Returns (net, A, sigma2, z_star); the seed is part of the contract and
    the indefiniteness is asserted by the acceptance suite.
    """
    gen = np.random.default_rng(seed)
    net = tanh_net(seed + 100, p=2, d=5, hidden=3, gamma_value=0.02)
    A = np.eye(5) + 0.6 * gen.standard_normal((5, 5))
    z_star = gen.standard_normal(2)
    return net, A, 1e-2, z_star


# -- desk-scale experiment suite ---------------------------------------------

SUITE_HEIGHT = 8
SUITE_WIDTH = 8
SUITE_SEED = 404
SUITE_LATENT_DIM = 4
SUITE_HIDDEN = 12
SUITE_GAMMA = 0.013
SUITE_OFFSET = 0.5


def suite_net() -> GeneratorNet:
    """The d=64 generator behind the synthetic experiment mode.

    The output layer's columns are smoothed white noise, so the generator
    paints smooth images and its Jacobian survives the blur; the orthogonal
    complement (where the off-manifold truth components live) is then
    high-frequency. This mirrors the trained-generator setting where the
    manifold captures the smooth structure and fine detail lies off it,
    and it keeps the two inference routes' strengths cleanly separated
    across the noise ladder.
    """
    d = SUITE_HEIGHT * SUITE_WIDTH
    p, hidden = SUITE_LATENT_DIM, SUITE_HIDDEN
    gen = np.random.default_rng(SUITE_SEED)
    W1 = gen.standard_normal((hidden, p)) / np.sqrt(p)
    b1 = 0.3 * gen.standard_normal(hidden)
    smooth = build_blur(1.0, SUITE_HEIGHT, SUITE_WIDTH, 4).matrix
    W2 = smooth @ gen.standard_normal((d, hidden))
    W2 = 0.6 * W2 / np.sqrt(np.mean(np.sum(W2**2, axis=0)))
    b2 = 0.5 + 0.1 * gen.standard_normal(d)
    return GeneratorNet(
        latent_dim=p, output_dim=d,
        mean_layers=(Dense(W=W1, b=b1), Activation("tanh"), Dense(W=W2, b=b2)),
        cov_head=constant_cov_head("diagonal", p, d, SUITE_GAMMA),
    )


def suite_images(count: int, off_manifold: bool = True,
                 seed: int = SUITE_SEED + 1):
    """Ground-truth images for the synthetic sweep.

    Each image is g(z) for a random latent, displaced (when requested) by
    SUITE_OFFSET along a random unit direction orthogonal to the generator's
    output subspace, so its distance to the manifold is exactly certified.
    """
    net = suite_net()
    gen = np.random.default_rng(seed)
    from .generator import g_mean

    final = net.mean_layers[-1]
    U, _, _ = np.linalg.svd(final.W, full_matrices=True)
    null_basis = U[:, final.W.shape[1]:]
    images = []
    for _ in range(count):
        z = gen.standard_normal(net.latent_dim) * 0.7
        x = g_mean(net, z)
        if off_manifold:
            coeff = gen.standard_normal(null_basis.shape[1])
            u = null_basis @ coeff
            x = x + SUITE_OFFSET * u / np.linalg.norm(u)
        images.append(x)
    return net, images


def suite_blur(eta: float, radius: int = 4):
    return build_blur(eta, SUITE_HEIGHT, SUITE_WIDTH, radius)
