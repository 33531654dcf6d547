"""Truncated SVD of the document-term matrix and elbow rank selection.

The factorization is a seeded randomized range-finder SVD (Gaussian sketch
with oversampling 10 and 4 power iterations, re-orthonormalized each pass).
When the sketch width reaches the smaller matrix dimension the result is
exact up to floating point. Component signs are fixed deterministically so
equal inputs give bit-equal models.

``elbow`` picks the retained rank from a cumulative explained-variance
curve: the index farthest (perpendicular distance) from the chord joining
the curve's endpoints, ties going to the smallest index.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .errors import ReducerError
from .vectorizer import SparseVector

OVERSAMPLE = 10
POWER_ITERS = 4


@dataclass(frozen=True)
class SvdModel:
    """Truncated factorization: per-term embedding rows and spectrum."""

    term_embeddings: np.ndarray  # V x k, row per vocabulary term
    singular_values: np.ndarray  # k, non-increasing
    explained_variance_ratio: np.ndarray  # k, sigma_i^2 / ||A||_F^2
    k: int

    @property
    def n_terms(self) -> int:
        return self.term_embeddings.shape[0]


def _frobenius_sq(matrix) -> float:
    if sp.issparse(matrix):
        return float(np.dot(matrix.data, matrix.data))
    return float(np.sum(np.asarray(matrix) ** 2))


def _sign_fix(vt: np.ndarray) -> np.ndarray:
    # Make the largest-magnitude entry of each right singular vector positive.
    pivot = np.argmax(np.abs(vt), axis=1)
    signs = np.sign(vt[np.arange(vt.shape[0]), pivot])
    signs[signs == 0] = 1.0
    return vt * signs[:, None]


def fit_svd(matrix, k_max: int, seed: int) -> SvdModel:
    """Seeded randomized truncated SVD of a (sparse or dense) matrix.

    Requires ``1 <= k_max <= min(n_rows, n_cols) - 1``. Explained variance
    ratios are taken against the full Frobenius mass of the input matrix.
    """
    m, n = matrix.shape
    if m == 0 or n == 0:
        raise ReducerError(
            f"cannot factorize a matrix with zero rows or columns: {m}x{n}",
            code="empty-matrix",
        )
    min_dim = min(m, n)
    if not 1 <= k_max <= min_dim - 1:
        raise ReducerError(
            f"k_max={k_max} out of range [1, {min_dim - 1}] for a {m}x{n} matrix",
            code="k-out-of-range",
        )
    rng = np.random.default_rng(seed)
    sketch = min(k_max + OVERSAMPLE, min_dim)
    omega = rng.standard_normal((n, sketch))
    q, _ = np.linalg.qr(matrix @ omega)
    for _ in range(POWER_ITERS):
        z, _ = np.linalg.qr(matrix.T @ q)
        q, _ = np.linalg.qr(matrix @ z)
    b = (matrix.T @ q).T  # equals Q^T A; keeps products in sparse @ dense form
    _, sigma, vt = np.linalg.svd(b, full_matrices=False)
    vt = _sign_fix(vt)
    sigma = sigma[:k_max]
    vt = vt[:k_max]
    fro_sq = _frobenius_sq(matrix)
    if fro_sq > 0.0:
        evr = sigma**2 / fro_sq
    else:
        evr = np.zeros_like(sigma)
    return SvdModel(
        term_embeddings=np.ascontiguousarray(vt.T),
        singular_values=sigma,
        explained_variance_ratio=evr,
        k=k_max,
    )


def truncate(model: SvdModel, k: int) -> SvdModel:
    """Restrict a fitted model to its leading k components (exact)."""
    if not 1 <= k <= model.k:
        raise ReducerError(
            f"cannot truncate rank-{model.k} model to k={k}", code="k-out-of-range"
        )
    return replace(
        model,
        term_embeddings=np.ascontiguousarray(model.term_embeddings[:, :k]),
        singular_values=model.singular_values[:k].copy(),
        explained_variance_ratio=model.explained_variance_ratio[:k].copy(),
        k=k,
    )


def elbow(curve) -> int:
    """Knee of a non-decreasing curve: 1-based index of the point with the
    largest perpendicular distance to the chord between the endpoints.

    All-collinear curves (zero distance everywhere) yield 1 by the
    smallest-index tie-break.
    """
    y = np.asarray(curve, dtype=np.float64)
    if y.ndim != 1 or y.shape[0] < 3:
        raise ReducerError(
            f"elbow needs a curve of length >= 3, got {y.shape}", code="curve-too-short"
        )
    if np.any(np.diff(y) < 0):
        raise ReducerError("elbow curve must be non-decreasing", code="non-monotone")
    n = y.shape[0]
    x = np.arange(1, n + 1, dtype=np.float64)
    # |cross((end - start), (p_i - start))|; the 1/|chord| factor is constant
    # across i and cannot change the argmax.
    cross = np.abs((x[-1] - x[0]) * (y - y[0]) - (y[-1] - y[0]) * (x - x[0]))
    # A mathematically collinear curve must give 1, but rounding leaves
    # cross values at the eps scale instead of exact zeros; anything below
    # this noise floor counts as zero. The floor scales with y like cross
    # does, preserving scale invariance.
    noise_floor = 32.0 * np.finfo(np.float64).eps * (x[-1] - x[0]) * (y[-1] - y[0])
    if float(cross.max()) <= noise_floor:
        return 1
    return int(np.argmax(cross)) + 1


def project(model: SvdModel, vec: SparseVector) -> np.ndarray:
    """Map one document vector into the k-dimensional latent space.

    For a document of the fitting corpus this reproduces its row of
    ``U @ diag(sigma)``. The map is linear in the input.
    """
    if vec.dim != model.n_terms:
        raise ReducerError(
            f"vector dimension {vec.dim} != vocabulary size {model.n_terms}",
            code="dimension-mismatch",
        )
    if len(vec.indices) == 0:
        return np.zeros(model.k)
    return vec.values @ model.term_embeddings[vec.indices]
