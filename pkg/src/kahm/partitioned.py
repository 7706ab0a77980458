"""Large sample blocks: cluster into parts of bounded size, one KAHM per part.

The parts are combined by taking the smallest per-part distance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import KahmModel, as_sample_block, build_kahm, kahm_distance
from .parallel import ordered_map

DEFAULT_MAX_PART_SIZE = 1000
KMEANS_MAX_ITER = 100


@dataclass(frozen=True)
class PartitionedKahm:
    parts: tuple[KahmModel, ...]
    assignment: np.ndarray  # cluster id per original row
    cluster_seed: int

    @property
    def n_parts(self) -> int:
        return len(self.parts)

    @property
    def n_samples(self) -> int:
        return int(self.assignment.shape[0])

    @property
    def dim(self) -> int:
        return self.parts[0].dim


def part_count(n_samples: int, max_part_size: int = DEFAULT_MAX_PART_SIZE) -> int:
    if n_samples <= max_part_size:
        return 1
    return math.ceil(n_samples / max_part_size)


def _sqdist(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    d = (X * X).sum(axis=1)[:, None] + (C * C).sum(axis=1)[None, :] - 2.0 * (X @ C.T)
    return np.maximum(d, 0.0)


def _farthest_point_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    chosen = [int(rng.integers(X.shape[0]))]
    closest = _sqdist(X, X[chosen])[:, 0]
    for _ in range(1, k):
        nxt = int(np.argmax(closest))
        chosen.append(nxt)
        closest = np.minimum(closest, _sqdist(X, X[nxt : nxt + 1])[:, 0])
    return X[chosen].copy()


def _repair_empty(X: np.ndarray, labels: np.ndarray, centers: np.ndarray, k: int) -> None:
    counts = np.bincount(labels, minlength=k)
    for empty in np.flatnonzero(counts == 0):
        donor = int(np.argmax(counts))
        members = np.flatnonzero(labels == donor)
        far = members[np.argmax(_sqdist(X[members], centers[donor : donor + 1])[:, 0])]
        labels[far] = empty
        centers[empty] = X[far]
        counts[donor] -= 1
        counts[empty] = 1


def cluster_split(samples, S: int, seed: int) -> np.ndarray:
    """k-means assignment of rows into S non-empty clusters, deterministic in ``seed``."""
    X = as_sample_block(samples)
    N = X.shape[0]
    if not 1 <= S <= N:
        raise ValueError(f"cluster count {S} outside [1, {N}]")
    if S == 1:
        return np.zeros(N, dtype=np.int64)
    rng = np.random.default_rng(seed)
    centers = _farthest_point_init(X, S, rng)
    labels = np.argmin(_sqdist(X, centers), axis=1)
    for _ in range(KMEANS_MAX_ITER):
        _repair_empty(X, labels, centers, S)
        for j in range(S):
            centers[j] = X[labels == j].mean(axis=0)
        new = np.argmin(_sqdist(X, centers), axis=1)
        if np.array_equal(new, labels):
            break
        labels = new
    _repair_empty(X, labels, centers, S)
    return labels.astype(np.int64)


def plan_parts(samples, seed: int, max_part_size: int = DEFAULT_MAX_PART_SIZE):
    """Cluster assignment and per-part row blocks for one sample block."""
    Y = as_sample_block(samples)
    S = part_count(Y.shape[0], max_part_size)
    assignment = cluster_split(Y, S, seed)
    blocks = [Y[assignment == s] for s in range(S)]
    return assignment, blocks


def build_partitioned(
    samples, seed: int = 0, max_part_size: int = DEFAULT_MAX_PART_SIZE
) -> PartitionedKahm:
    assignment, blocks = plan_parts(samples, seed, max_part_size)
    parts = ordered_map(build_kahm, blocks)
    return PartitionedKahm(tuple(parts), assignment, int(seed))


def part_distances(pk: PartitionedKahm, y) -> np.ndarray:
    """Per-part distances, shape ``(S,)`` for one point or ``(M, S)`` for rows."""
    y = np.asarray(y, dtype=np.float64)
    cols = [np.atleast_1d(kahm_distance(part, np.atleast_2d(y))) for part in pk.parts]
    D = np.stack(cols, axis=1)
    return D[0] if y.ndim == 1 else D


def partitioned_distance(pk: PartitionedKahm, y):
    D = part_distances(pk, y)
    return float(D.min()) if D.ndim == 1 else D.min(axis=1)
