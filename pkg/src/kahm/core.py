"""Single kernel affine hull machine (KAHM).

A KAHM maps any point of feature space onto the affine hull of a sample
set.  The map is built from kernel-smoothed indicator regressions of the
samples in a PCA subspace, with the regularization level obtained as the
fixed point of a data-dependent residual map.  Everything is determined by
the samples alone; there is nothing to tune.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import linalg as sla

from .errors import (
    DegenerateData,
    NoConvergence,
    NumericalFailure,
    SmootherUnderflowWarning,
    ZeroData,
)

MAX_SUBSPACE_DIM = 20
RANGE_THRESHOLD = 1e-3
FIXED_POINT_TOL = 1e-9
FIXED_POINT_MAX_ITER = 200
DENOMINATOR_FLOOR = 1e-300


def as_sample_block(samples) -> np.ndarray:
    """Validate and return samples as a C-contiguous float64 ``N x p`` matrix."""
    Y = np.array(samples, dtype=np.float64, order="C", copy=True)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.ndim != 2 or Y.shape[0] < 1 or Y.shape[1] < 1:
        raise ValueError(f"expected a non-empty N x p matrix, got shape {Y.shape}")
    if not np.all(np.isfinite(Y)):
        raise ValueError("samples contain NaN or Inf")
    return Y


@dataclass(frozen=True)
class Encoder:
    projection: np.ndarray  # n x p, rows = leading covariance eigenvectors

    @property
    def subspace_dim(self) -> int:
        return self.projection.shape[0]

    def encode(self, Y: np.ndarray) -> np.ndarray:
        return Y @ self.projection.T


@dataclass(frozen=True)
class KernelParams:
    covariance: np.ndarray  # theta, n x n
    cholesky: np.ndarray  # lower factor of covariance + jitter * I
    jitter: float

    @property
    def dim(self) -> int:
        return self.covariance.shape[0]

    def whiten(self, X: np.ndarray) -> np.ndarray:
        """Map encoded rows so Euclidean distance equals the Mahalanobis one."""
        return sla.solve_triangular(self.cholesky, np.atleast_2d(X).T, lower=True).T


@dataclass(frozen=True)
class KahmModel:
    samples: np.ndarray
    encoder: Encoder
    kernel: KernelParams | None
    lambda_star: float
    e_hat: float
    coef: np.ndarray
    encoded: np.ndarray
    spectral_norm: float
    frobenius_norm: float

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def subspace_dim(self) -> int:
        return self.encoder.subspace_dim

    @property
    def degenerate(self) -> bool:
        return self.n_samples == 1


class LambdaFit(NamedTuple):
    lambda_star: float
    e_hat: float
    iterations: int


def _principal_axes(Y: np.ndarray) -> np.ndarray:
    """All covariance eigenvectors as rows, by decreasing eigenvalue."""
    centered = Y - Y.mean(axis=0)
    try:
        # right singular vectors of the centered data are the covariance
        # eigenvectors, already sorted by decreasing eigenvalue
        _, _, vt = np.linalg.svd(centered, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigen-decomposition failed: {exc}") from exc
    return _fix_signs(vt)


def _fix_signs(rows: np.ndarray) -> np.ndarray:
    # largest-magnitude entry positive; argmax picks the lowest index on ties
    rows = rows.copy()
    pivot = np.argmax(np.abs(rows), axis=1)
    flip = rows[np.arange(rows.shape[0]), pivot] < 0
    rows[flip] *= -1.0
    return rows


def compute_encoder(samples, n: int) -> Encoder:
    Y = as_sample_block(samples)
    N, p = Y.shape
    if not 1 <= n <= min(p, N - 1):
        raise ValueError(f"subspace dim {n} outside [1, {min(p, N - 1)}]")
    return Encoder(np.ascontiguousarray(_principal_axes(Y)[:n]))


def _min_projected_range(Y: np.ndarray, axes: np.ndarray) -> float:
    X = Y @ axes.T
    return float(np.min(X.max(axis=0) - X.min(axis=0)))


def select_subspace_dim(samples) -> int:
    """Largest n <= min(20, p, N-1) whose projected coordinates all spread >= 1e-3."""
    Y = as_sample_block(samples)
    N, p = Y.shape
    if N < 2:
        raise ValueError("subspace selection needs at least two samples")
    axes = _principal_axes(Y)
    n = min(MAX_SUBSPACE_DIM, p, N - 1)
    while _min_projected_range(Y, axes[:n]) < RANGE_THRESHOLD:
        n -= 1
        if n == 0:
            raise DegenerateData("samples show no spread along any principal direction")
    return n


def make_kernel_params(encoded: np.ndarray) -> KernelParams:
    X = np.atleast_2d(encoded)
    n = X.shape[1]
    theta = np.atleast_2d(np.cov(X, rowvar=False))
    theta = 0.5 * (theta + theta.T)
    jitter = max(1e-12, 1e-10 * float(np.trace(theta)) / n)
    try:
        chol = np.linalg.cholesky(theta + jitter * np.eye(n))
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"kernel covariance not positive definite: {exc}") from exc
    return KernelParams(theta, chol, jitter)


def gaussian_kernel(xi, xj, kernel: KernelParams, n: int | None = None) -> float:
    n = kernel.dim if n is None else n
    d = np.asarray(xi, dtype=np.float64) - np.asarray(xj, dtype=np.float64)
    z = sla.solve_triangular(kernel.cholesky, d, lower=True)
    return float(np.exp(-float(z @ z) / (2.0 * n)))


def _scaled_sqdist(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * (A @ B.T)
    return np.maximum(sq, 0.0)


def kernel_matrix(encoded: np.ndarray, kernel: KernelParams) -> np.ndarray:
    Z = kernel.whiten(encoded)
    q = _scaled_sqdist(Z, Z) / (2.0 * kernel.dim)
    q = 0.5 * (q + q.T)
    np.fill_diagonal(q, 0.0)
    return np.exp(-q)


def residual_map(K: np.ndarray, samples, e: float, tau: float) -> float:
    """Mean squared smoothing residual of the samples at regularization e + tau.

    Evaluated with a Cholesky solve of ``K + (e + tau) I``.
    """
    Y = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    N, p = Y.shape
    factor = sla.cho_factor(K + (e + tau) * np.eye(N), lower=True)
    smoothed = K @ sla.cho_solve(factor, Y)
    return float(np.sum((Y - smoothed) ** 2) / (p * N))


def fit_lambda(
    K: np.ndarray,
    samples,
    tol: float = FIXED_POINT_TOL,
    max_iter: int = FIXED_POINT_MAX_ITER,
) -> LambdaFit:
    Y = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    N, p = Y.shape
    fro2 = float(np.sum(Y * Y))
    if fro2 == 0.0:
        raise ZeroData("samples are all zero")
    mean_sq = fro2 / (p * N)
    tau = 2.0 * mean_sq

    # One eigendecomposition of K makes every residual evaluation O(N):
    # Y - K (K + lam I)^-1 Y = U diag(lam / (s + lam)) U^T Y.
    try:
        s, U = np.linalg.eigh(K)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"kernel eigendecomposition failed: {exc}") from exc
    energy = np.sum((U.T @ Y) ** 2, axis=1)

    def residual(e: float) -> float:
        lam = e + tau
        return float(np.sum((lam / (s + lam)) ** 2 * energy) / (p * N))

    e = 0.5 * mean_sq
    for it in range(1, max_iter + 1):
        e_next = residual(e)
        step = abs(e_next - e)
        e_prev, e = e, e_next
        if step <= tol * max(1.0, e_prev):
            return LambdaFit(e + tau, e, it)
    if step > 1e-6 * max(1.0, e_prev):
        raise NoConvergence(f"fixed point not reached in {max_iter} iterations (step {step:.3e})")
    return LambdaFit(e + tau, e, max_iter)


def _spd_inverse(A: np.ndarray) -> np.ndarray:
    try:
        factor = sla.cho_factor(A, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"regularized kernel matrix not SPD: {exc}") from exc
    # C order, so a model read back from an archive evaluates bit-identically
    return np.ascontiguousarray(sla.cho_solve(factor, np.eye(A.shape[0])))


def build_kahm(samples) -> KahmModel:
    Y = as_sample_block(samples)
    N, p = Y.shape
    spectral = float(np.linalg.norm(Y, 2))
    frob = float(np.linalg.norm(Y))
    if N == 1:
        return KahmModel(
            samples=Y,
            encoder=Encoder(np.zeros((0, p))),
            kernel=None,
            lambda_star=0.0,
            e_hat=0.0,
            coef=np.ones((1, 1)),
            encoded=np.zeros((1, 0)),
            spectral_norm=spectral,
            frobenius_norm=frob,
        )
    n = select_subspace_dim(Y)
    encoder = compute_encoder(Y, n)
    encoded = encoder.encode(Y)
    kernel = make_kernel_params(encoded)
    K = kernel_matrix(encoded, kernel)
    fit = fit_lambda(K, Y)
    coef = _spd_inverse(K + fit.lambda_star * np.eye(N))
    return KahmModel(
        samples=Y,
        encoder=encoder,
        kernel=kernel,
        lambda_star=fit.lambda_star,
        e_hat=fit.e_hat,
        coef=coef,
        encoded=encoded,
        spectral_norm=spectral,
        frobenius_norm=frob,
    )


def affine_weights(model: KahmModel, probes) -> np.ndarray:
    """Affine-combination weights (rows sum to one) of the samples for each probe."""
    P = np.atleast_2d(np.asarray(probes, dtype=np.float64))
    if P.shape[1] != model.dim:
        raise ValueError(f"probe dimension {P.shape[1]} != model dimension {model.dim}")
    M, N = P.shape[0], model.n_samples
    if model.degenerate:
        return np.ones((M, 1))
    kernel = model.kernel
    Z = kernel.whiten(model.encoder.encode(P))
    Zs = kernel.whiten(model.encoded)
    q = _scaled_sqdist(Z, Zs) / (2.0 * kernel.dim)
    # The weights are invariant to a positive rescaling of the kernel vector,
    # so shifting by the row minimum keeps far probes from underflowing.
    k = np.exp(-(q - q.min(axis=1, keepdims=True)))
    h = k @ model.coef.T
    denom = h.sum(axis=1)
    bad = np.abs(denom) < DENOMINATOR_FLOOR
    weights = np.empty((M, N))
    ok = ~bad
    weights[ok] = h[ok] / denom[ok, None]
    if np.any(bad):
        warnings.warn(
            f"smoother denominator vanished for {int(bad.sum())} probe(s); "
            "using the nearest training sample",
            SmootherUnderflowWarning,
            stacklevel=2,
        )
        nearest = np.argmin(_scaled_sqdist(P[bad], model.samples), axis=1)
        weights[bad] = 0.0
        weights[np.flatnonzero(bad), nearest] = 1.0
    return weights


def kahm_map(model: KahmModel, y) -> np.ndarray:
    """Image of ``y`` (one point or rows of points) on the affine hull of the samples."""
    y = np.asarray(y, dtype=np.float64)
    out = affine_weights(model, y) @ model.samples
    return out[0] if y.ndim == 1 else out


def kahm_distance(model: KahmModel, y):
    y = np.asarray(y, dtype=np.float64)
    P = np.atleast_2d(y)
    if model.degenerate:
        d = np.linalg.norm(P - model.samples[0], axis=1)
    else:
        d = np.linalg.norm(P - affine_weights(model, P) @ model.samples, axis=1)
    return float(d[0]) if y.ndim == 1 else d


def growth_factor(model: KahmModel) -> float:
    """The factor 1 + p N^2 / (2 ||Y||_F^2) shared by the norm and distance bounds."""
    N, p = model.samples.shape
    return 1.0 + p * N * N / (2.0 * model.frobenius_norm**2)


def norm_bound(model: KahmModel) -> float:
    return model.spectral_norm * growth_factor(model)


def difference_norm(samples: np.ndarray, y) -> float:
    """Spectral norm of the p x N matrix [y - y^1, ..., y - y^N]."""
    D = np.asarray(y, dtype=np.float64)[None, :] - samples
    return float(np.linalg.norm(D, 2))
