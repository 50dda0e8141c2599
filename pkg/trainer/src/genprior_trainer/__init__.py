"""Trains a dense probabilistic generator on MNIST and exports it in the
portable weights format consumed by the genprior package."""

__version__ = "0.1.0"

from .export import export_weights, weights_document
from .model import DenseVAE
from .train import TrainerConfig, train
