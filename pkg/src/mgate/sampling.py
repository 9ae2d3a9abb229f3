"""Haar-random input amplitudes with scheduling-independent streams."""

import numpy as np

DEFAULT_SEED = 20051215


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """Generator for sample ``index``, derived only from ``(seed, index)``."""
    return np.random.default_rng([int(seed), int(index)])


def haar_amplitudes(n: int, seed: int = DEFAULT_SEED, d: int = 4, start: int = 0) -> np.ndarray:
    """``n`` Haar-random unit vectors in C^d, shape ``(n, d)``.

    Sample ``i`` depends only on ``(seed, start + i)``, so any slicing of the
    index range across workers reproduces the same draws.
    """
    out = np.empty((n, d), dtype=complex)
    for i in range(n):
        z = sample_rng(seed, start + i).standard_normal(2 * d)
        v = z[:d] + 1j * z[d:]
        out[i] = v / np.linalg.norm(v)
    return out
