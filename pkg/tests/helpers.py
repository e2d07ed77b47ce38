"""Model builders shared by the test modules."""

from __future__ import annotations

import numpy as np


def random_cov(rng: np.random.Generator, k: int = 4, df: int = 8) -> np.ndarray:
    """Wishart-style positive-definite covariance."""
    x = rng.standard_normal((k, df))
    return x @ x.T / df


def markov_cov(rng: np.random.Generator) -> np.ndarray:
    """Covariance over (A0, A1, A2, A3) with A1 - A3 - A2 Markov."""
    # rows are loadings on independent noises (Z0, Z1, Z2, A3)
    a3 = np.array([0, 0, 0, 1.0])
    a1 = rng.normal() * a3 + [0, abs(rng.normal(0.7, 0.2)) + 0.1, 0, 0]
    a2 = rng.normal() * a3 + [0, 0, abs(rng.normal(0.7, 0.2)) + 0.1, 0]
    w = rng.normal(size=3)
    a0 = w[0] * a1 + w[1] * a2 + w[2] * a3 + [abs(rng.normal(0.5, 0.2)) + 0.1, 0, 0, 0]
    load = np.stack([a0, a1, a2, a3])
    return load @ load.T
