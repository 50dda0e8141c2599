import numpy as np
import pytest
import torch

from genprior_trainer.train import TrainerConfig, train


def blob_images(count: int, side: int = 14, seed: int = 0) -> np.ndarray:
    """Synthetic digit-like images: one or two smooth bumps in [0, 1]."""
    gen = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:side, 0:side]
    images = np.zeros((count, side * side))
    for k in range(count):
        img = np.zeros((side, side))
        for _ in range(int(gen.integers(1, 3))):
            cx, cy = gen.uniform(3, side - 3, 2)
            w = gen.uniform(1.0, 2.5)
            img += np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * w * w))
        img /= max(img.max(), 1e-9)
        images[k] = img.ravel()
    return images


@pytest.fixture(scope="session")
def trained():
    torch.set_num_threads(1)
    images = blob_images(400, seed=1)
    cfg = TrainerConfig(latent_dim=4, hidden=48, epochs=15, transfer_epochs=3,
                        batch_size=64, learning_rate=2e-3, recon_var=0.02,
                        seed=7)
    model, report = train(images, cfg)
    return model, report, images, cfg
