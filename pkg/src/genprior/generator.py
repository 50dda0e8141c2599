"""Probabilistic generator networks.

A generator maps a latent vector z in R^p to a Gaussian on R^d with mean
g(z) and covariance Gamma(z). The mean path is a chain of dense affine
layers and smooth pointwise activations (tanh, sigmoid, softplus), which
keeps the exact Jacobian available through layer-wise forward-mode
differentiation and avoids an autodiff dependency. The covariance head
produces one of three variants (isotropic, diagonal, full) and is floored
so the smallest eigenvalue of Gamma(z) never drops below eps_gamma.

An optional encoder mean map f : R^d -> R^p supports expansion-point
initialization; when absent, callers fall back to a numerical latent
search.

Networks round-trip through a JSON weights file (documented in the README)
with floats written at 17 significant digits, so save -> load preserves
every value exactly.
"""

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import rng
from .linalg import chol_factor

ACTIVATIONS = ("tanh", "sigmoid", "softplus")
COV_VARIANTS = ("isotropic", "diagonal", "full")


class WeightsParseError(ValueError):
    """Weights file violates the schema (bad type, unknown field/activation)."""


class WeightsValidationError(ValueError):
    """Weights file parsed but layer shapes are inconsistent."""


class EncoderAbsentError(RuntimeError):
    """Encoder mean requested on a net without encoder layers."""


@dataclass(frozen=True)
class Dense:
    W: np.ndarray
    b: np.ndarray

    @property
    def out_dim(self) -> int:
        return self.W.shape[0]

    @property
    def in_dim(self) -> int:
        return self.W.shape[1]


@dataclass(frozen=True)
class Activation:
    name: str


Layer = Dense | Activation


@dataclass(frozen=True)
class CovHead:
    """Covariance head: layers map z to raw parameters, then a floor.

    isotropic: raw (1,)            -> (softplus(raw) + eps_gamma) * I
    diagonal:  raw (d,)            -> diag(softplus(raw) + eps_gamma)
    full:      raw (d(d+1)/2,)     -> L L^T + eps_gamma * I, L lower-tri
    """

    variant: str
    eps_gamma: float
    layers: tuple


@dataclass(frozen=True)
class GeneratorNet:
    latent_dim: int
    output_dim: int
    mean_layers: tuple
    cov_head: CovHead
    encoder: tuple | None = None

    def __post_init__(self):
        _check_chain(self.mean_layers, self.latent_dim, self.output_dim, "mean_layers")
        raw = _cov_raw_dim(self.cov_head.variant, self.output_dim)
        _check_chain(self.cov_head.layers, self.latent_dim, raw, "cov_head.layers")
        if self.encoder is not None:
            _check_chain(self.encoder, self.output_dim, self.latent_dim, "encoder")
        if self.cov_head.variant not in COV_VARIANTS:
            raise WeightsValidationError(
                f"unknown covariance variant {self.cov_head.variant!r}")
        if not self.cov_head.eps_gamma > 0:
            raise WeightsValidationError("eps_gamma must be positive")

    @property
    def has_encoder(self) -> bool:
        return self.encoder is not None


def _cov_raw_dim(variant: str, d: int) -> int:
    if variant == "isotropic":
        return 1
    if variant == "diagonal":
        return d
    if variant == "full":
        return d * (d + 1) // 2
    raise WeightsValidationError(f"unknown covariance variant {variant!r}")


def _check_chain(layers, in_dim: int, out_dim: int, where: str) -> None:
    dim = in_dim
    for k, layer in enumerate(layers):
        if isinstance(layer, Dense):
            if layer.W.ndim != 2 or layer.b.ndim != 1:
                raise WeightsValidationError(f"{where}[{k}]: W must be 2-d, b 1-d")
            if layer.W.shape[0] != layer.b.shape[0]:
                raise WeightsValidationError(
                    f"{where}[{k}]: W has {layer.W.shape[0]} rows but b has "
                    f"{layer.b.shape[0]} entries")
            if layer.W.shape[1] != dim:
                raise WeightsValidationError(
                    f"{where}[{k}]: expects input dim {layer.W.shape[1]}, "
                    f"chain provides {dim}")
            dim = layer.W.shape[0]
        elif isinstance(layer, Activation):
            if layer.name not in ACTIVATIONS:
                raise WeightsParseError(
                    f"{where}[{k}]: unknown activation {layer.name!r}")
        else:
            raise WeightsValidationError(f"{where}[{k}]: unknown layer type")
    if dim != out_dim:
        raise WeightsValidationError(
            f"{where}: chain maps to dim {dim}, expected {out_dim}")


def _act(name: str, x: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return np.tanh(x)
    if name == "sigmoid":
        return expit(x)
    if name == "softplus":
        return np.logaddexp(0.0, x)
    raise WeightsParseError(f"unknown activation {name!r}")


def _act_deriv(name: str, x: np.ndarray) -> np.ndarray:
    if name == "tanh":
        t = np.tanh(x)
        return 1.0 - t * t
    if name == "sigmoid":
        s = expit(x)
        return s * (1.0 - s)
    if name == "softplus":
        return expit(x)
    raise WeightsParseError(f"unknown activation {name!r}")


def forward(layers, x: np.ndarray) -> np.ndarray:
    """Run a layer chain on a vector (dim,) or a batch (n, dim)."""
    h = np.asarray(x, dtype=float)
    batched = h.ndim == 2
    for layer in layers:
        if isinstance(layer, Dense):
            h = h @ layer.W.T + layer.b if batched else layer.W @ h + layer.b
        else:
            h = _act(layer.name, h)
    return h


def forward_with_jacobian(layers, x: np.ndarray):
    """Forward pass plus the exact Jacobian of the chain at x.

    Affine layers contribute W, activations contribute diag of the pointwise
    derivative; the chain rule is accumulated in forward mode.
    """
    h = np.asarray(x, dtype=float)
    J = np.eye(h.shape[0])
    for layer in layers:
        if isinstance(layer, Dense):
            h = layer.W @ h + layer.b
            J = layer.W @ J
        else:
            J = _act_deriv(layer.name, h)[:, None] * J
            h = _act(layer.name, h)
    return h, J


def g_mean(net: GeneratorNet, z: np.ndarray) -> np.ndarray:
    """Deterministic generator mean g(z); accepts a batch (n, p) as well."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != net.latent_dim:
        raise ValueError(f"z has dim {z.shape[-1]}, net expects {net.latent_dim}")
    if not np.all(np.isfinite(z)):
        raise ValueError("z must be finite")
    return forward(net.mean_layers, z)


def jacobian(net: GeneratorNet, z: np.ndarray) -> np.ndarray:
    """Exact d-by-p Jacobian of the generator mean at z."""
    z = np.asarray(z, dtype=float)
    _, J = forward_with_jacobian(net.mean_layers, z)
    return J


class GammaRep:
    """Structured view of Gamma(z) so hot paths avoid dense d-by-d algebra.

    kind is "iso" (scalar variance), "diag" (variance vector) or "full"
    (dense SPD matrix). All variants honor the eps_gamma floor.
    """

    def __init__(self, kind: str, value, d: int):
        self.kind = kind
        self.value = value
        self.d = d

    def dense(self) -> np.ndarray:
        if self.kind == "iso":
            return self.value * np.eye(self.d)
        if self.kind == "diag":
            return np.diag(self.value)
        return self.value

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Gamma^{-1} b for a vector or matrix b."""
        if self.kind == "iso":
            return b / self.value
        if self.kind == "diag":
            v = self.value if b.ndim == 1 else self.value[:, None]
            return b / v
        L = chol_factor(self.value)
        import scipy.linalg

        y = scipy.linalg.solve_triangular(L, b, lower=True)
        return scipy.linalg.solve_triangular(L.T, y, lower=False)

    def quad(self, r: np.ndarray) -> float:
        """r^T Gamma^{-1} r."""
        return float(r @ self.solve(r))

    def logdet(self) -> float:
        if self.kind == "iso":
            return float(self.d * np.log(self.value))
        if self.kind == "diag":
            return float(np.sum(np.log(self.value)))
        L = chol_factor(self.value)
        return float(2.0 * np.sum(np.log(np.diag(L))))

    def sample(self, gen: np.random.Generator) -> np.ndarray:
        """One draw from N(0, Gamma)."""
        eps = gen.standard_normal(self.d)
        if self.kind == "iso":
            return np.sqrt(self.value) * eps
        if self.kind == "diag":
            return np.sqrt(self.value) * eps
        return chol_factor(self.value) @ eps


def gamma_rep(net: GeneratorNet, z: np.ndarray) -> GammaRep:
    """Structured Gamma(z) per the head's variant."""
    z = np.asarray(z, dtype=float)
    raw = forward(net.cov_head.layers, z)
    eps = net.cov_head.eps_gamma
    d = net.output_dim
    variant = net.cov_head.variant
    if variant == "isotropic":
        return GammaRep("iso", float(np.logaddexp(0.0, raw[0]) + eps), d)
    if variant == "diagonal":
        return GammaRep("diag", np.logaddexp(0.0, raw) + eps, d)
    L = np.zeros((d, d))
    L[np.tril_indices(d)] = raw
    return GammaRep("full", L @ L.T + eps * np.eye(d), d)


def gamma(net: GeneratorNet, z: np.ndarray) -> np.ndarray:
    """Dense SPD covariance Gamma(z), smallest eigenvalue >= eps_gamma."""
    return gamma_rep(net, z).dense()


def encoder_mean(net: GeneratorNet, x: np.ndarray) -> np.ndarray:
    """Encoder mean f(x); raises EncoderAbsentError when no encoder is stored."""
    if net.encoder is None:
        raise EncoderAbsentError(
            "net has no encoder layers; use a latent search instead")
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != net.output_dim:
        raise ValueError(f"x has dim {x.shape[-1]}, net expects {net.output_dim}")
    return forward(net.encoder, x)


def sample_prior_draw(net: GeneratorNet, seed: int) -> np.ndarray:
    """One draw x ~ N(g(z), Gamma(z)) with z ~ N(0, I), deterministic in seed."""
    gen = rng.stream(seed)
    z = gen.standard_normal(net.latent_dim)
    mean = g_mean(net, z)
    return mean + gamma_rep(net, z).sample(gen)


# -- weights file ------------------------------------------------------------

WEIGHTS_VERSION = 1


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _layer_to_obj(layer) -> str:
    if isinstance(layer, Dense):
        W, b = layer.W, layer.b
        return (
            '{"type": "dense", "rows": %d, "cols": %d, "W": [%s], "b": [%s]}'
            % (W.shape[0], W.shape[1],
               ", ".join(_fmt(v) for v in W.ravel()),
               ", ".join(_fmt(v) for v in b))
        )
    return '{"type": "%s"}' % layer.name


def _chain_to_obj(layers) -> str:
    return "[%s]" % ", ".join(_layer_to_obj(l) for l in layers)


def save_weights(net: GeneratorNet, path) -> None:
    """Write the net as a UTF-8 JSON document, floats at 17 significant digits."""
    parts = [
        '"version": %d' % WEIGHTS_VERSION,
        '"latent_dim": %d' % net.latent_dim,
        '"output_dim": %d' % net.output_dim,
        '"mean_layers": %s' % _chain_to_obj(net.mean_layers),
        '"cov_head": {"variant": "%s", "eps_gamma": %s, "layers": %s}'
        % (net.cov_head.variant, _fmt(net.cov_head.eps_gamma),
           _chain_to_obj(net.cov_head.layers)),
    ]
    if net.encoder is not None:
        parts.append('"encoder": %s' % _chain_to_obj(net.encoder))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("{" + ",\n ".join(parts) + "}\n")


def _parse_layer(obj, where: str) -> Layer:
    if not isinstance(obj, dict) or "type" not in obj:
        raise WeightsParseError(f"{where}: layer entry must be an object with 'type'")
    kind = obj["type"]
    if kind == "dense":
        for key in ("rows", "cols", "W", "b"):
            if key not in obj:
                raise WeightsParseError(f"{where}: dense layer missing field {key!r}")
        rows, cols = int(obj["rows"]), int(obj["cols"])
        W = np.asarray(obj["W"], dtype=float)
        b = np.asarray(obj["b"], dtype=float)
        if W.size != rows * cols:
            raise WeightsValidationError(
                f"{where}: W has {W.size} entries, expected rows*cols = {rows * cols}")
        if b.size != rows:
            raise WeightsValidationError(
                f"{where}: b has {b.size} entries, expected rows = {rows}")
        return Dense(W=W.reshape(rows, cols), b=b)
    if kind in ACTIVATIONS:
        return Activation(name=kind)
    raise WeightsParseError(f"{where}: unknown activation/layer type {kind!r}")


def _parse_chain(obj, where: str) -> tuple:
    if not isinstance(obj, list):
        raise WeightsParseError(f"{where}: expected a list of layers")
    return tuple(_parse_layer(entry, f"{where}[{k}]") for k, entry in enumerate(obj))


def load_weights(path) -> GeneratorNet:
    """Parse and validate a weights file; inverse of save_weights."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise WeightsParseError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise WeightsParseError("top level must be an object")
    for key in ("version", "latent_dim", "output_dim", "mean_layers", "cov_head"):
        if key not in doc:
            raise WeightsParseError(f"missing field {key!r}")
    if int(doc["version"]) != WEIGHTS_VERSION:
        raise WeightsParseError(f"unsupported version {doc['version']!r}")
    head = doc["cov_head"]
    for key in ("variant", "eps_gamma", "layers"):
        if key not in head:
            raise WeightsParseError(f"cov_head missing field {key!r}")
    if head["variant"] not in COV_VARIANTS:
        raise WeightsParseError(f"cov_head.variant: unknown value {head['variant']!r}")
    cov = CovHead(
        variant=head["variant"],
        eps_gamma=float(head["eps_gamma"]),
        layers=_parse_chain(head["layers"], "cov_head.layers"),
    )
    encoder = None
    if "encoder" in doc and doc["encoder"] is not None:
        encoder = _parse_chain(doc["encoder"], "encoder")
    return GeneratorNet(
        latent_dim=int(doc["latent_dim"]),
        output_dim=int(doc["output_dim"]),
        mean_layers=_parse_chain(doc["mean_layers"], "mean_layers"),
        cov_head=cov,
        encoder=encoder,
    )
