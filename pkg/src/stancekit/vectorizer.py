"""TF-IDF fitting and transformation to L2-normalized sparse vectors.

Weighting: raw term count times a smoothed inverse document frequency,
``idf = ln((1 + N) / (1 + df)) + 1``, followed by L2 normalization of the
document vector. The vocabulary is the lexicographically ordered set of
all tokens seen at fit time; out-of-vocabulary tokens are ignored at
transform time.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import VectorizerError


@dataclass(frozen=True)
class SparseVector:
    """A sparse row vector: strictly increasing indices, nonzero values."""

    dim: int
    indices: np.ndarray
    values: np.ndarray

    def norm(self) -> float:
        return float(np.sqrt(np.dot(self.values, self.values)))

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.dim)
        dense[self.indices] = self.values
        return dense

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> "SparseVector":
        dense = np.asarray(dense, dtype=np.float64)
        (idx,) = np.nonzero(dense)
        return cls(dim=dense.shape[0], indices=idx.astype(np.int64), values=dense[idx])


@dataclass(frozen=True)
class VectorizerModel:
    """Fitted vocabulary with document frequencies and IDF weights."""

    vocabulary: dict[str, int]
    doc_freq: np.ndarray
    idf: np.ndarray
    n_docs: int

    @property
    def vocab_size(self) -> int:
        return len(self.vocabulary)

    def terms(self) -> list[str]:
        """Vocabulary terms in column-index order."""
        ordered = [""] * len(self.vocabulary)
        for term, col in self.vocabulary.items():
            ordered[col] = term
        return ordered


def fit(corpus: list[list[str]]) -> VectorizerModel:
    """Fit vocabulary, document frequencies, and IDF weights over a corpus.

    The corpus must contain at least one document (documents may be empty).
    """
    if len(corpus) == 0:
        raise VectorizerError("cannot fit on an empty corpus", code="empty-corpus")
    df_counter: Counter[str] = Counter()
    for doc in corpus:
        df_counter.update(set(doc))
    n_docs = len(corpus)
    terms = sorted(df_counter)
    vocabulary = {term: col for col, term in enumerate(terms)}
    doc_freq = np.array([df_counter[t] for t in terms], dtype=np.int64)
    idf = np.log((1.0 + n_docs) / (1.0 + doc_freq)) + 1.0
    return VectorizerModel(
        vocabulary=vocabulary, doc_freq=doc_freq, idf=idf, n_docs=n_docs
    )


def transform(model: VectorizerModel, doc: list[str]) -> SparseVector:
    """Transform one token list into a unit-norm TF-IDF vector.

    A document with no in-vocabulary tokens maps to the all-zero vector.
    """
    counts: Counter[int] = Counter()
    for token in doc:
        col = model.vocabulary.get(token)
        if col is not None:
            counts[col] += 1
    if not counts:
        return SparseVector(
            dim=model.vocab_size,
            indices=np.empty(0, dtype=np.int64),
            values=np.empty(0, dtype=np.float64),
        )
    indices = np.array(sorted(counts), dtype=np.int64)
    values = np.array([counts[i] for i in indices], dtype=np.float64)
    values = values * model.idf[indices]
    norm = np.sqrt(np.dot(values, values))
    if norm > 0.0:
        values = values / norm
    return SparseVector(dim=model.vocab_size, indices=indices, values=values)


def transform_matrix(model: VectorizerModel, docs: list[list[str]]) -> sp.csr_matrix:
    """Transform many documents into one CSR matrix of stacked row vectors."""
    indptr = [0]
    indices: list[np.ndarray] = []
    data: list[np.ndarray] = []
    for doc in docs:
        vec = transform(model, doc)
        indices.append(vec.indices)
        data.append(vec.values)
        indptr.append(indptr[-1] + len(vec.indices))
    if indices:
        all_indices = np.concatenate(indices)
        all_data = np.concatenate(data)
    else:
        all_indices = np.empty(0, dtype=np.int64)
        all_data = np.empty(0, dtype=np.float64)
    return sp.csr_matrix(
        (all_data, all_indices, np.array(indptr, dtype=np.int64)),
        shape=(len(docs), model.vocab_size),
    )
