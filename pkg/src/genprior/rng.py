"""Deterministic random streams.

All stochastic operations in this package take an explicit integer seed and
draw from a counter-based Philox4x32-10 bit generator keyed by that seed.
Philox is stateless-by-key, so identical seeds reproduce identical streams
bit-exactly across runs, platforms and process boundaries, which is what the
repeated-noise experiments rely on.

Per-cell seeds for experiment sweeps are derived by hashing the base seed
together with the cell indices (SHA-256 over a canonical ASCII string,
truncated to 63 bits). The derivation is documented here so individual cells
can be replayed in isolation.
"""

import hashlib

import numpy as np


def stream(seed: int) -> np.random.Generator:
    """Return a Generator over a Philox bit stream keyed by ``seed``."""
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)))


def derive_seed(base: int, *parts) -> int:
    """Derive an independent sub-seed from a base seed and cell coordinates.

    ``parts`` may be ints, floats or strings; floats are canonicalized via
    repr so 2.0 and 2 hash differently (they are different cells).
    """
    text = "|".join([str(int(base))] + [repr(p) for p in parts])
    digest = hashlib.sha256(text.encode("ascii")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def normal(seed: int, size) -> np.ndarray:
    """Standard normal draws from the Philox stream for ``seed``."""
    return stream(seed).standard_normal(size)
