"""Federated experiment harness: client splits, preprocessing, evaluation.

Each client fits its (class, client) cells from its own rows only; at
inference a client contributes nothing but distance values.  There are no
optimization rounds.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import InfeasibleSpec, RangeError
from .federation import (
    GlobalModel,
    LabeledDataset,
    assumption_score,
    build_global_model,
    distance_tensor,
    predict_global,
    predict_local,
)
from .partitioned import DEFAULT_MAX_PART_SIZE

MAX_COVERAGE_RETRIES = 1000


class Mode(str, Enum):
    LABEL_SKEW = "label_skew"
    SINGLE_CLASS = "single_class"
    PASSTHROUGH = "passthrough"


@dataclass(frozen=True)
class PartitionSpec:
    client_count: int = 100
    skew_fraction: float = 0.2
    seed: int = 0
    mode: Mode = Mode.LABEL_SKEW

    def classes_per_client(self, class_count: int) -> int:
        # round half up
        return int(np.floor(self.skew_fraction * class_count + 0.5))


@dataclass
class FederationReport:
    per_client_accuracy: np.ndarray
    averaged_accuracy: float
    global_accuracy: float
    assumption_E: float
    runtime_seconds: float = 0.0
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def lines(self, prefix: str = "") -> list[str]:
        return [
            f"{prefix}global_accuracy={self.global_accuracy:.6f}",
            f"{prefix}local_accuracy={self.averaged_accuracy:.6f}",
            f"{prefix}E={self.assumption_E:.6g}",
            f"{prefix}clients_evaluated={int(np.sum(np.isfinite(self.per_client_accuracy)))}",
        ]


def preprocess_scale_flatten(images) -> np.ndarray:
    """Row-major flatten of ``N x H x W`` pixel arrays, scaled to [0, 1]."""
    X = np.asarray(images)
    if X.size and (X.min() < 0 or X.max() > 255):
        raise RangeError("pixel values must lie in [0, 255]")
    return X.reshape(X.shape[0], -1).astype(np.float64) / 255.0


def preprocess_tanh(features) -> np.ndarray:
    return np.tanh(np.asarray(features, dtype=np.float64))


def _draw_assignment(C: int, Q: int, k: int, rng: np.random.Generator) -> list[np.ndarray]:
    for _ in range(MAX_COVERAGE_RETRIES):
        sets = [np.sort(rng.choice(C, size=k, replace=False)) + 1 for _ in range(Q)]
        if np.unique(np.concatenate(sets)).size == C:
            return sets
    raise InfeasibleSpec(f"could not cover all {C} classes in {MAX_COVERAGE_RETRIES} draws")


def label_skew_partition(
    samples, labels, spec: PartitionSpec, class_count: int | None = None
) -> tuple[LabeledDataset, dict[int, list[int]]]:
    """Give each client a random subset of classes and share class rows equally.

    Returns the client-annotated dataset and the class -> clients map.
    """
    labels = np.asarray(labels).astype(np.int64)
    C = int(labels.max()) if class_count is None else int(class_count)
    Q = int(spec.client_count)
    k = spec.classes_per_client(C)
    if k < 1 or k > C:
        raise InfeasibleSpec(f"skew {spec.skew_fraction} gives {k} classes per client (C={C})")
    if Q * k < C:
        raise InfeasibleSpec(f"{Q} clients x {k} classes cannot cover {C} classes")
    rng = np.random.default_rng(spec.seed)
    sets = _draw_assignment(C, Q, k, rng)
    owners: dict[int, list[int]] = {c: [] for c in range(1, C + 1)}
    for q, classes in enumerate(sets, start=1):
        for c in classes:
            owners[int(c)].append(q)
    clients = np.zeros(labels.shape[0], dtype=np.int64)
    for c in range(1, C + 1):
        rows = np.flatnonzero(labels == c)
        rows = rows[rng.permutation(rows.size)]
        # array_split puts the remainder on the first (lowest-indexed) owners
        for q, chunk in zip(owners[c], np.array_split(rows, len(owners[c]))):
            clients[chunk] = q
    data = LabeledDataset(samples, labels, clients, class_count=C, client_count=Q)
    return data, owners


def single_class_partition(samples, labels, class_count: int | None = None):
    labels = np.asarray(labels).astype(np.int64)
    C = int(labels.max()) if class_count is None else int(class_count)
    data = LabeledDataset(samples, labels, labels.copy(), class_count=C, client_count=C)
    return data, {c: [c] for c in range(1, C + 1)}


def client_test_view(test_labels, owners: dict[int, list[int]]) -> dict[int, np.ndarray]:
    """Test rows visible to each client: every row of every class it owns."""
    test_labels = np.asarray(test_labels).astype(np.int64)
    classes_of: dict[int, list[int]] = {}
    for c, qs in owners.items():
        for q in qs:
            classes_of.setdefault(q, []).append(c)
    return {
        q: np.flatnonzero(np.isin(test_labels, classes_of[q])) for q in sorted(classes_of)
    }


def partition(train: LabeledDataset, spec: PartitionSpec):
    if spec.mode == Mode.LABEL_SKEW:
        return label_skew_partition(train.samples, train.labels, spec, train.class_count)
    if spec.mode == Mode.SINGLE_CLASS:
        return single_class_partition(train.samples, train.labels, train.class_count)
    owners: dict[int, list[int]] = {}
    for c in range(1, train.class_count + 1):
        owners[c] = sorted(set(train.clients[train.labels == c].tolist()))
    return train, owners


def evaluate(
    gm: GlobalModel,
    train: LabeledDataset,
    test: LabeledDataset,
    owners: dict[int, list[int]],
    seed: int = 0,
) -> FederationReport:
    start = time.perf_counter()
    tensor = distance_tensor(gm, test.samples)
    global_acc = float(np.mean(predict_global(gm, test.samples, tensor).class_ids == test.labels))
    views = client_test_view(test.labels, owners)
    per_client = np.full(gm.client_count, np.nan)
    for q, rows in views.items():
        if rows.size == 0 or not gm.client_cells(q):
            continue
        pred = predict_local(gm, q, test.samples[rows], tensor[rows])
        per_client[q - 1] = float(np.mean(pred.class_ids == test.labels[rows]))
    evaluated = per_client[np.isfinite(per_client)]
    return FederationReport(
        per_client_accuracy=per_client,
        averaged_accuracy=float(np.mean(evaluated)) if evaluated.size else float("nan"),
        global_accuracy=global_acc,
        assumption_E=assumption_score(gm, train),
        runtime_seconds=time.perf_counter() - start,
        seed=seed,
    )


def run_federation(
    train: LabeledDataset,
    test: LabeledDataset,
    spec: PartitionSpec,
    seed: int | None = None,
    max_part_size: int = DEFAULT_MAX_PART_SIZE,
) -> FederationReport:
    """Partition, fit every client's cells in isolation, and score both classifiers."""
    start = time.perf_counter()
    seed = spec.seed if seed is None else seed
    if test.dim != train.dim:
        raise ValueError(f"train dim {train.dim} != test dim {test.dim}")
    split, owners = partition(train, PartitionSpec(spec.client_count, spec.skew_fraction, seed, spec.mode))
    gm = build_global_model(split, seed, max_part_size)
    report = evaluate(gm, split, test, owners, seed)
    report.runtime_seconds = time.perf_counter() - start
    return report
