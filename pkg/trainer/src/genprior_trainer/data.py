"""Big-endian IDX readers for the MNIST files (trainer-local copy)."""

import os
import struct

import numpy as np

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

TRAIN_IMAGES = "train-images-idx3-ubyte"
TRAIN_LABELS = "train-labels-idx1-ubyte"
TEST_IMAGES = "t10k-images-idx3-ubyte"
TEST_LABELS = "t10k-labels-idx1-ubyte"


def read_idx_images(path, limit=None) -> np.ndarray:
    """(n, rows*cols) float array scaled to [0, 1]."""
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) < 16:
            raise ValueError(f"{path}: truncated header")
        magic, count, rows, cols = struct.unpack(">IIII", header)
        if magic != IMAGES_MAGIC:
            raise ValueError(f"{path}: bad magic 0x{magic:08x}")
        take = count if limit is None else min(limit, count)
        data = fh.read(take * rows * cols)
    if len(data) < take * rows * cols:
        raise ValueError(f"{path}: truncated pixel data")
    pixels = np.frombuffer(data, dtype=np.uint8)
    return pixels.reshape(take, rows * cols).astype(np.float64) / 255.0


def read_idx_labels(path, limit=None) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(8)
        if len(header) < 8:
            raise ValueError(f"{path}: truncated header")
        magic, count = struct.unpack(">II", header)
        if magic != LABELS_MAGIC:
            raise ValueError(f"{path}: bad magic 0x{magic:08x}")
        take = count if limit is None else min(limit, count)
        data = fh.read(take)
    return np.frombuffer(data, dtype=np.uint8)[:take].copy()


def load_mnist(mnist_dir, train_limit=None, test_limit=None):
    """Returns (train_images, test_images); raises when files are missing."""
    train_path = os.path.join(mnist_dir, TRAIN_IMAGES)
    test_path = os.path.join(mnist_dir, TEST_IMAGES)
    for p in (train_path, test_path):
        if not os.path.exists(p):
            raise FileNotFoundError(f"missing MNIST file: {p}")
    return (read_idx_images(train_path, train_limit),
            read_idx_images(test_path, test_limit))


def write_idx_images(path, images_u8: np.ndarray) -> None:
    """Inverse of read_idx_images for (n, rows, cols) uint8 arrays."""
    n, rows, cols = images_u8.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IMAGES_MAGIC, n, rows, cols))
        fh.write(images_u8.astype(np.uint8).tobytes())
