"""
Positional encodings on the atom graph: random-walk return probabilities and
Laplacian eigenvectors with seeded random signs.
"""
import logging

import numpy as np

logger = logging.getLogger(__name__)


def rw_pe(adjacency: np.ndarray, k: int) -> np.ndarray:
    """Column i-1 holds the probability of returning home after i random-walk steps."""
    if k < 1:
        raise ValueError("k must be >= 1")
    A = np.asarray(adjacency, dtype=np.float64)
    n = A.shape[0]
    out = np.zeros((n, k))
    if n == 0:
        return out
    degree = A.sum(axis=0)
    transition = A / np.clip(degree, 1.0, None)[None, :]
    power = np.eye(n)
    for step in range(k):
        power = power @ transition
        out[:, step] = np.diag(power)
    out[degree == 0] = 0.0
    return out


def lap_pe(adjacency: np.ndarray, k: int, rng_seed) -> np.ndarray:
    """Eigenvectors 2..k+1 of L = D - A (ascending eigenvalue), zero-padded, with random signs."""
    if k < 1:
        raise ValueError("k must be >= 1")
    A = np.asarray(adjacency, dtype=np.float64)
    n = A.shape[0]
    out = np.zeros((n, k))
    if n <= 1:
        return out
    laplacian = np.diag(A.sum(axis=1)) - A
    eigenvalues, eigenvectors = np.linalg.eigh(laplacian)
    order = np.argsort(eigenvalues, kind="stable")
    vectors = eigenvectors[:, order][:, 1:k + 1]
    # canonical sign before randomisation: largest-magnitude entry positive
    pivots = np.argmax(np.abs(vectors), axis=0)
    vectors = vectors * np.where(vectors[pivots, np.arange(vectors.shape[1])] < 0, -1.0, 1.0)
    signs = np.random.default_rng(rng_seed).choice([-1.0, 1.0], size=vectors.shape[1])
    out[:, :vectors.shape[1]] = vectors * signs
    return out
