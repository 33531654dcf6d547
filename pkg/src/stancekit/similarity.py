"""Soft cosine similarity over an implicit term-similarity matrix.

The term-similarity matrix S is the Gram matrix of row-normalized latent
term embeddings, never materialized: the quadratic form u^T S v is
evaluated as (E^T u) . (E^T v) with E the normalized V x k embedding
matrix, so one evaluation costs O(nnz * k) instead of O(V^2). S is
positive semidefinite by construction, symmetric, and has unit diagonal
for every term with a nonzero embedding row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SimilarityError
from .reducer import SvdModel, project
from .vectorizer import SparseVector

FEATURE_MODES = ("scm_only", "concat", "concat_scm")

# Quadratic self-forms at or below this are treated as zero vectors.
ZERO_FORM_EPS = 1e-15


@dataclass(frozen=True)
class TermSimilarityMatrix:
    """Implicit Gram form of row-normalized term embeddings."""

    embeddings: np.ndarray  # V x k, rows unit-norm or all-zero

    @property
    def n_terms(self) -> int:
        return self.embeddings.shape[0]

    def embed(self, vec: SparseVector) -> np.ndarray:
        """E^T u for one sparse vector: the latent image used in u^T S v."""
        if vec.dim != self.n_terms:
            raise SimilarityError(
                f"vector dimension {vec.dim} != term count {self.n_terms}",
                code="dimension-mismatch",
            )
        if len(vec.indices) == 0:
            return np.zeros(self.embeddings.shape[1])
        return vec.values @ self.embeddings[vec.indices]

    def quad_form(self, u: SparseVector, v: SparseVector) -> float:
        """u^T S v, evaluated through the latent images."""
        return float(np.dot(self.embed(u), self.embed(v)))


def build_term_similarity(model: SvdModel) -> TermSimilarityMatrix:
    """Row-normalize the SVD term embeddings; zero rows stay zero."""
    emb = model.term_embeddings
    norms = np.linalg.norm(emb, axis=1)
    safe = np.where(norms > 0.0, norms, 1.0)
    return TermSimilarityMatrix(embeddings=emb / safe[:, None])


def embed_cosine(eu: np.ndarray, ev: np.ndarray) -> float:
    """Soft cosine given the two latent images E^T u and E^T v.

    Returns 0.0 when either self-form is numerically zero; clamped to
    [-1, 1] against rounding.
    """
    uu = float(np.dot(eu, eu))
    vv = float(np.dot(ev, ev))
    if uu <= ZERO_FORM_EPS or vv <= ZERO_FORM_EPS:
        return 0.0
    # sqrt(uu * vv) rather than sqrt(uu) * sqrt(vv): for u == v the
    # denominator is then bit-exactly uu, so self-similarity is exactly 1.0.
    value = float(np.dot(eu, ev)) / float(np.sqrt(uu * vv))
    return float(min(1.0, max(-1.0, value)))


def soft_cosine(u: SparseVector, v: SparseVector, s: TermSimilarityMatrix) -> float:
    """u^T S v / (sqrt(u^T S u) * sqrt(v^T S v)), clamped to [-1, 1].

    Returns 0.0 when either self-form is numerically zero.
    """
    return embed_cosine(s.embed(u), s.embed(v))


def pair_feature(
    model: SvdModel,
    s: TermSimilarityMatrix,
    headline_vec: SparseVector,
    body_vec: SparseVector,
    mode: str = "concat_scm",
) -> np.ndarray:
    """Assemble the classifier input for one headline/body pair.

    Modes: ``scm_only`` gives the similarity scalar alone; ``concat`` the
    two latent projections back-to-back; ``concat_scm`` (default) both
    projections followed by the similarity scalar.
    """
    if mode not in FEATURE_MODES:
        raise SimilarityError(
            f"unknown feature mode {mode!r}, expected one of {FEATURE_MODES}",
            code="unknown-mode",
        )
    if mode == "scm_only":
        return np.array([soft_cosine(headline_vec, body_vec, s)])
    parts = [project(model, headline_vec), project(model, body_vec)]
    if mode == "concat_scm":
        parts.append(np.array([soft_cosine(headline_vec, body_vec, s)]))
    return np.concatenate(parts)


def feature_dim(k: int, mode: str) -> int:
    """Input width the classifier sees for a given latent rank and mode."""
    if mode == "scm_only":
        return 1
    if mode == "concat":
        return 2 * k
    if mode == "concat_scm":
        return 2 * k + 1
    raise SimilarityError(
        f"unknown feature mode {mode!r}, expected one of {FEATURE_MODES}",
        code="unknown-mode",
    )
