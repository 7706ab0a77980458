"""Small synthetic datasets for smoke runs and tests."""
from __future__ import annotations

import numpy as np

from .federation import LabeledDataset

# unit-scale layout, comparable to pixel features scaled into [0, 1]
BLOB_CENTERS = np.array([[0.0, 0.0], [0.5, 0.0], [0.25, 0.4]])


def make_blobs(
    n_per_class: int = 100,
    centers=BLOB_CENTERS,
    spread: float = 0.05,
    seed: int = 0,
    n_clients: int = 1,
) -> LabeledDataset:
    """Isotropic Gaussian blobs, one class per center, clients dealt round-robin."""
    rng = np.random.default_rng(seed)
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    C, p = centers.shape
    X = np.concatenate([c + spread * rng.standard_normal((n_per_class, p)) for c in centers])
    labels = np.repeat(np.arange(1, C + 1), n_per_class)
    clients = np.tile(np.arange(1, n_clients + 1), -(-X.shape[0] // n_clients))[: X.shape[0]]
    return LabeledDataset(X, labels, clients, class_count=C, client_count=n_clients)
