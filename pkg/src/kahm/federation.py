"""Per-class global models assembled from independently built client cells.

Each (class, client) block of training rows gets its own partitioned KAHM.
A class is represented by the minimum distance over its client cells; the
score exp(-distance / p) is the class-membership predictor, and the
classifiers pick the class of smallest distance.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import build_kahm, difference_norm
from .errors import AllClassesEmpty, ClientHasNoCells, EmptyClass, Unsupported
from .parallel import ordered_map
from .partitioned import (
    DEFAULT_MAX_PART_SIZE,
    PartitionedKahm,
    partitioned_distance,
    plan_parts,
)

Cell = tuple[int, int]


@dataclass(frozen=True)
class LabeledDataset:
    """Samples with 1-based class labels and 1-based client ids."""

    samples: np.ndarray
    labels: np.ndarray
    clients: np.ndarray | None = None
    class_count: int | None = None
    client_count: int | None = None

    def __post_init__(self):
        Y = np.ascontiguousarray(np.atleast_2d(np.asarray(self.samples, dtype=np.float64)))
        z = np.asarray(self.labels).astype(np.int64).ravel()
        N = Y.shape[0]
        q = np.ones(N, dtype=np.int64) if self.clients is None else np.asarray(self.clients).astype(np.int64).ravel()
        if z.shape[0] != N or q.shape[0] != N:
            raise ValueError("labels and clients must have one entry per sample")
        if not np.all(np.isfinite(Y)):
            raise ValueError("samples contain NaN or Inf")
        C = int(z.max()) if self.class_count is None else int(self.class_count)
        Q = int(q.max()) if self.client_count is None else int(self.client_count)
        if z.min() < 1 or z.max() > C:
            raise ValueError(f"label out of range 1..{C}")
        if q.min() < 1 or q.max() > Q:
            raise ValueError(f"client id out of range 1..{Q}")
        object.__setattr__(self, "samples", Y)
        object.__setattr__(self, "labels", z)
        object.__setattr__(self, "clients", q)
        object.__setattr__(self, "class_count", C)
        object.__setattr__(self, "client_count", Q)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]


def index_by_class_client(data: LabeledDataset) -> dict[Cell, np.ndarray]:
    """Ascending row indices of every non-empty (class, client) block."""
    index: dict[Cell, np.ndarray] = {}
    order = np.lexsort((np.arange(data.n_samples), data.clients, data.labels))
    z, q = data.labels[order], data.clients[order]
    breaks = np.flatnonzero((np.diff(z) != 0) | (np.diff(q) != 0)) + 1
    for chunk in np.split(order, breaks):
        if chunk.size:
            index[(int(data.labels[chunk[0]]), int(data.clients[chunk[0]]))] = chunk
    return index


def cell_seed(seed: int, c: int, q: int) -> int:
    """64-bit clustering seed of one cell; depends on nothing but (seed, c, q)."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, c, q])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class GlobalModel:
    cells: dict[Cell, PartitionedKahm]
    class_count: int
    client_count: int
    dim: int
    seed: int = 0
    max_part_size: int = DEFAULT_MAX_PART_SIZE
    _order: tuple[Cell, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_order", tuple(sorted(self.cells)))

    @property
    def cell_keys(self) -> tuple[Cell, ...]:
        return self._order

    def class_cells(self, c: int) -> list[int]:
        return [q for (cc, q) in self._order if cc == c]

    def client_cells(self, q: int) -> list[int]:
        return [c for (c, qq) in self._order if qq == q]

    def cell_size(self, c: int, q: int) -> int:
        return self.cells[(c, q)].n_samples

    def cell_frobenius(self, c: int, q: int) -> float:
        return float(np.sqrt(sum(p.frobenius_norm**2 for p in self.cells[(c, q)].parts)))


def build_cells(
    blocks: dict[Cell, np.ndarray], seed: int, max_part_size: int = DEFAULT_MAX_PART_SIZE
) -> dict[Cell, PartitionedKahm]:
    """Fit one partitioned KAHM per (class, client) block of rows."""
    keys = sorted(blocks)
    seeds = {key: cell_seed(seed, *key) for key in keys}
    plans = ordered_map(lambda key: plan_parts(blocks[key], seeds[key], max_part_size), keys)
    flat = [(key, b) for key, (_, parts) in zip(keys, plans) for b in parts]
    models = iter(ordered_map(lambda item: build_kahm(item[1]), flat))
    cells = {}
    for key, (assignment, parts) in zip(keys, plans):
        cells[key] = PartitionedKahm(tuple(next(models) for _ in parts), assignment, seeds[key])
    return cells


def build_global_model(
    data: LabeledDataset, seed: int = 0, max_part_size: int = DEFAULT_MAX_PART_SIZE
) -> GlobalModel:
    index = index_by_class_client(data)
    present = {c for (c, _) in index}
    for c in range(1, data.class_count + 1):
        if c not in present:
            raise EmptyClass(c)
    blocks = {key: data.samples[rows] for key, rows in index.items()}
    cells = build_cells(blocks, seed, max_part_size)
    return GlobalModel(cells, data.class_count, data.client_count, data.dim, int(seed), int(max_part_size))


def _probes(gm: GlobalModel, y) -> np.ndarray:
    P = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if P.shape[1] != gm.dim:
        raise ValueError(f"probe dimension {P.shape[1]} != model dimension {gm.dim}")
    return P


def distance_tensor(gm: GlobalModel, y, keys=None) -> np.ndarray:
    """Cell distances as an ``(M, C, Q)`` array, +inf where a cell is absent.

    Only distance values leave a cell; nothing else about it is read.
    """
    P = _probes(gm, y)
    keys = gm.cell_keys if keys is None else sorted(keys)
    D = np.full((P.shape[0], gm.class_count, gm.client_count), np.inf)
    cols = ordered_map(lambda key: partitioned_distance(gm.cells[key], P), keys)
    for (c, q), col in zip(keys, cols):
        D[:, c - 1, q - 1] = col
    return D


def class_distances(gm: GlobalModel, y) -> tuple[np.ndarray, np.ndarray]:
    """Per-class global distances ``(M, C)`` and 1-based argmin clients (0 if absent)."""
    D = distance_tensor(gm, y)
    best = D.min(axis=2)
    argq = np.argmin(D, axis=2) + 1  # first minimum -> smallest client index
    argq[~np.isfinite(best)] = 0
    return best, argq


def global_distance(gm: GlobalModel, c: int, y):
    y = np.asarray(y, dtype=np.float64)
    keys = [(c, q) for q in gm.class_cells(c)]
    P = _probes(gm, y)
    if not keys:
        d = np.full(P.shape[0], np.inf)
    else:
        d = distance_tensor(gm, P, keys)[:, c - 1, :].min(axis=1)
    return float(d[0]) if y.ndim == 1 else d


def score_from_distance(distance, p: int):
    return np.exp(-np.asarray(distance, dtype=np.float64) / p)


def predict_score(gm: GlobalModel, c: int, y):
    s = score_from_distance(global_distance(gm, c, y), gm.dim)
    return float(s) if np.ndim(s) == 0 else s


def induced_kernel(gm: GlobalModel, c: int, y1, y2):
    return predict_score(gm, c, y1) * predict_score(gm, c, y2)


@dataclass(frozen=True)
class Prediction:
    class_id: int
    per_class_distance: np.ndarray
    per_class_score: np.ndarray
    argmin_client: np.ndarray


@dataclass(frozen=True)
class BatchPrediction:
    class_ids: np.ndarray  # (M,)
    distances: np.ndarray  # (M, C)
    argmin_client: np.ndarray  # (M, C)
    p: int

    @property
    def scores(self) -> np.ndarray:
        return score_from_distance(self.distances, self.p)

    def __len__(self) -> int:
        return self.class_ids.shape[0]

    def __getitem__(self, i: int) -> Prediction:
        return Prediction(
            int(self.class_ids[i]),
            self.distances[i].copy(),
            self.scores[i],
            self.argmin_client[i].copy(),
        )


def _argmin_class(distances: np.ndarray) -> np.ndarray:
    if np.any(~np.isfinite(distances).any(axis=1)):
        raise AllClassesEmpty("no class has a finite distance")
    return np.argmin(distances, axis=1) + 1  # ties -> smallest class index


def predict_global(gm: GlobalModel, y, tensor: np.ndarray | None = None) -> BatchPrediction:
    D = distance_tensor(gm, y) if tensor is None else tensor
    best = D.min(axis=2)
    argq = np.argmin(D, axis=2) + 1
    argq[~np.isfinite(best)] = 0
    return BatchPrediction(_argmin_class(best), best, argq, gm.dim)


def predict_local(gm: GlobalModel, q: int, y, tensor: np.ndarray | None = None) -> BatchPrediction:
    if not 1 <= q <= gm.client_count:
        raise ValueError(f"client {q} outside 1..{gm.client_count}")
    classes = gm.client_cells(q)
    if not classes:
        raise ClientHasNoCells(q)
    if tensor is None:
        tensor = distance_tensor(gm, y, [(c, q) for c in classes])
    D = tensor[:, :, q - 1]
    argq = np.where(np.isfinite(D), q, 0)
    return BatchPrediction(_argmin_class(D), D, argq, gm.dim)


def classify_global(gm: GlobalModel, y) -> Prediction:
    if not gm.cells:
        raise AllClassesEmpty("model has no cells")
    return predict_global(gm, np.atleast_2d(y))[0]


def classify_local(gm: GlobalModel, q: int, y) -> Prediction:
    return predict_local(gm, q, np.atleast_2d(y))[0]


def training_distances(gm: GlobalModel, data: LabeledDataset) -> np.ndarray:
    """Global distance of every training row to the model of its own class."""
    out = np.empty(data.n_samples)
    for c in range(1, gm.class_count + 1):
        rows = np.flatnonzero(data.labels == c)
        if rows.size:
            out[rows] = global_distance(gm, c, data.samples[rows])
    return out


def assumption_score(gm: GlobalModel, data: LabeledDataset) -> float:
    """Worst-case |1 - exp(-distance / p)| over training rows and their own class."""
    d = training_distances(gm, data)
    return float(np.max(np.abs(1.0 - score_from_distance(d, gm.dim))))


def deterministic_lower_bound(gm: GlobalModel, c: int, y) -> float:
    """Distance-based lower bound on the class-c score at a single point ``y``."""
    y = np.asarray(y, dtype=np.float64).ravel()
    clients = gm.class_cells(c)
    if not clients:
        raise EmptyClass(c)
    d = distance_tensor(gm, y[None, :], [(c, q) for q in clients])[0, c - 1]
    q_star = int(np.argmin(d)) + 1
    cell = gm.cells[(c, q_star)]
    if cell.n_parts != 1:
        raise Unsupported(f"cell ({c}, {q_star}) is partitioned into {cell.n_parts} parts")
    model = cell.parts[0]
    N = model.n_samples
    rate = 1.0 / gm.dim + N * N / (2.0 * model.frobenius_norm**2)
    return float(np.exp(-rate * difference_norm(model.samples, y)))
