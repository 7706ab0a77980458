"""Closed-form risk and complexity bounds, plus a Monte-Carlo check of the
empirical Rademacher complexity of the distance-induced hypothesis class.

All bounds are for the squared loss and depend only on the number of
training samples N and the confidence level delta (and epsilon for sample
complexity).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .federation import GlobalModel, LabeledDataset, global_distance, score_from_distance

RADEMACHER_CHUNK = 1024


def _check_n(N: int) -> None:
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")


def _check_delta(delta: float) -> None:
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")


def rademacher_bound(N: int) -> float:
    _check_n(N)
    return 1.0 / math.sqrt(N)


def loss_rademacher_bound(N: int) -> float:
    _check_n(N)
    return 2.0 / math.sqrt(N)


def confidence_term(N: int, delta: float) -> float:
    return math.sqrt(math.log(1.0 / delta) / (2.0 * N))


def generalization_bound(N: int, delta: float, empirical_loss: float = 0.0) -> float:
    """Empirical loss + 4/sqrt(N) + sqrt(log(1/delta) / 2N)."""
    _check_n(N)
    _check_delta(delta)
    if empirical_loss < 0:
        raise DomainError("empirical loss must be non-negative")
    return empirical_loss + 4.0 / math.sqrt(N) + confidence_term(N, delta)


def predictor_risk_bound(N: int, delta: float) -> float:
    return generalization_bound(N, delta, 0.0)


def _snap_ceil(x: float, rel: float = 1e-6) -> int:
    # delta is usually typed with ~6 significant digits (0.135335 for e^-2);
    # values that close to an integer are taken to be that integer
    nearest = round(x)
    if abs(x - nearest) <= rel * max(1.0, abs(x)):
        return int(nearest)
    return int(math.ceil(x))


def sample_complexity(epsilon: float, delta: float) -> int:
    if not epsilon > 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    _check_delta(delta)
    return _snap_ceil((4.0 + math.sqrt(math.log(1.0 / delta) / 2.0)) ** 2 / epsilon**2)


def negative_log_link(score: float, p: int) -> float:
    """Distance that maps to ``score`` under exp(-distance / p)."""
    if not 0.0 < score <= 1.0:
        raise DomainError(f"score must lie in (0, 1], got {score}")
    return -p * math.log(score)


@dataclass(frozen=True)
class BoundReport:
    n_samples: int
    delta: float
    rademacher_bound: float
    loss_rademacher_bound: float
    generalization_bound: float
    predictor_risk_bound: float
    empirical_loss: float = 0.0
    epsilon: float | None = None
    sample_complexity: int | None = None

    def lines(self) -> list[str]:
        out = [
            f"n={self.n_samples}",
            f"delta={self.delta!r}",
            f"empirical_loss={self.empirical_loss!r}",
            f"rademacher_bound={self.rademacher_bound:.12g}",
            f"loss_rademacher_bound={self.loss_rademacher_bound:.12g}",
            f"generalization_bound={self.generalization_bound:.12g}",
            f"predictor_risk_bound={self.predictor_risk_bound:.12g}",
        ]
        if self.epsilon is not None:
            out += [f"epsilon={self.epsilon!r}", f"sample_complexity={self.sample_complexity}"]
        return out


def bound_report(
    N: int, delta: float, epsilon: float | None = None, empirical_loss: float = 0.0
) -> BoundReport:
    return BoundReport(
        n_samples=N,
        delta=delta,
        rademacher_bound=rademacher_bound(N),
        loss_rademacher_bound=loss_rademacher_bound(N),
        generalization_bound=generalization_bound(N, delta, empirical_loss),
        predictor_risk_bound=predictor_risk_bound(N, delta),
        empirical_loss=empirical_loss,
        epsilon=epsilon,
        sample_complexity=None if epsilon is None else sample_complexity(epsilon, delta),
    )


@dataclass(frozen=True)
class RademacherProbe:
    signs: np.ndarray
    vertex_index: int


def hull_supremum(signs: np.ndarray, scores: np.ndarray) -> np.ndarray:
    """sup over the hull of (1/N) sum_i sigma_i f(y^i), one value per sign row.

    With K_c(y^i, y^j) = v_i v_j the objective is linear in the convex
    weights, so it peaks at a vertex:  max_j v_j (sigma . v) / N.
    """
    signs = np.atleast_2d(signs)
    corr = signs @ scores
    peak = np.where(corr >= 0, scores.max(), scores.min())
    return corr * peak / scores.shape[0]


def supremum_probe(signs: np.ndarray, scores: np.ndarray) -> RademacherProbe:
    corr = float(signs @ scores)
    j = int(np.argmax(scores)) if corr >= 0 else int(np.argmin(scores))
    return RademacherProbe(np.asarray(signs), j)


def draw_signs(N: int, trials: int, seed: int) -> np.ndarray:
    # chunks of fixed size with counter-derived seeds: identical draws no
    # matter how the work is later split
    chunks = []
    for k, start in enumerate(range(0, trials, RADEMACHER_CHUNK)):
        size = min(RADEMACHER_CHUNK, trials - start)
        rng = np.random.default_rng([int(seed), k])
        chunks.append(rng.integers(0, 2, size=(size, N), dtype=np.int8) * 2 - 1)
    return np.concatenate(chunks, axis=0)


def empirical_rademacher(
    gm: GlobalModel, c: int, data: LabeledDataset, trials: int = 10_000, seed: int = 0
) -> tuple[float, float]:
    """Monte-Carlo estimate and standard error of the empirical Rademacher complexity."""
    if trials < 1:
        raise DomainError("trials must be >= 1")
    scores = score_from_distance(global_distance(gm, c, data.samples), gm.dim)
    values = hull_supremum(draw_signs(data.n_samples, trials, seed).astype(np.float64), scores)
    estimate = float(np.mean(values))
    if trials == 1:
        return estimate, 0.0
    return estimate, float(np.std(values, ddof=1) / math.sqrt(trials))
