"""Export a trained DenseVAE as a portable generator weights file.

Writes the consumer's documented JSON schema directly (version 1, dense
layers with row-major weights, floats at 17 significant digits) so the file
is the only coupling between the two packages.
"""

import numpy as np

from .model import DenseVAE

WEIGHTS_VERSION = 1


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _dense_obj(linear) -> str:
    W = linear.weight.detach().cpu().double().numpy()
    b = linear.bias.detach().cpu().double().numpy()
    rows, cols = W.shape
    return ('{"type": "dense", "rows": %d, "cols": %d, "W": [%s], "b": [%s]}'
            % (rows, cols,
               ", ".join(_fmt(v) for v in W.ravel()),
               ", ".join(_fmt(v) for v in b)))


def _act_obj(name: str) -> str:
    return '{"type": "%s"}' % name


def weights_document(model: DenseVAE) -> str:
    """The full weights file content for a trained model."""
    mean_layers = ", ".join([
        _dense_obj(model.dec_hidden), _act_obj("tanh"),
        _dense_obj(model.dec_out), _act_obj("sigmoid")])
    encoder = ", ".join([
        _dense_obj(model.enc_hidden), _act_obj("tanh"),
        _dense_obj(model.enc_mu)])
    parts = [
        '"version": %d' % WEIGHTS_VERSION,
        '"latent_dim": %d' % model.latent_dim,
        '"output_dim": %d' % model.data_dim,
        '"mean_layers": [%s]' % mean_layers,
        '"cov_head": {"variant": "diagonal", "eps_gamma": %s, "layers": [%s]}'
        % (_fmt(model.eps_gamma), _dense_obj(model.cov_raw)),
        '"encoder": [%s]' % encoder,
    ]
    return "{" + ",\n ".join(parts) + "}\n"


def export_weights(model: DenseVAE, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(weights_document(model))


def decoder_forward_f64(model: DenseVAE, z: np.ndarray) -> np.ndarray:
    """Double-precision decoder mean on a latent batch (n, p).

    Reference values for the cross-package forward-agreement check.
    """
    import torch

    with torch.no_grad():
        zt = torch.as_tensor(np.asarray(z, dtype=np.float64))
        h = torch.tanh(zt @ model.dec_hidden.weight.double().T
                       + model.dec_hidden.bias.double())
        out = torch.sigmoid(h @ model.dec_out.weight.double().T
                            + model.dec_out.bias.double())
    return out.numpy()
