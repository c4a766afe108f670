"""Scrambled Sobol helpers (prefix-stable for a fixed seed)."""
from __future__ import annotations

import warnings

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc


def sobol(count: int, dim: int, seed: int) -> np.ndarray:
    engine = qmc.Sobol(d=dim, scramble=True, seed=np.random.default_rng(seed))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        u = engine.random(count)
    return np.clip(u, 1e-15, 1.0 - 1e-15)


def sphere_from_uniform(u: np.ndarray, n: int) -> np.ndarray:
    """Map uniforms of shape (N, 2n) to points on the unit sphere of C^n."""
    g = ndtri(u)
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g[:, :n] + 1j * g[:, n:]
