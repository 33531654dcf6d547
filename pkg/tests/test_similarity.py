"""Soft cosine similarity and pair featurization."""

from __future__ import annotations

import math

import numpy as np
import pytest

from stancekit.errors import SimilarityError
from stancekit.reducer import SvdModel, project
from stancekit.similarity import (
    FEATURE_MODES,
    TermSimilarityMatrix,
    build_term_similarity,
    embed_cosine,
    feature_dim,
    pair_feature,
    soft_cosine,
)
from stancekit.vectorizer import SparseVector


def _svd_model(embeddings: np.ndarray) -> SvdModel:
    v, k = embeddings.shape
    return SvdModel(
        term_embeddings=np.asarray(embeddings, dtype=np.float64),
        singular_values=np.linspace(2.0, 1.0, k),
        explained_variance_ratio=np.full(k, 1.0 / (k + 1)),
        k=k,
    )


def _vec(dense) -> SparseVector:
    return SparseVector.from_dense(np.asarray(dense, dtype=np.float64))


# Three terms with known geometry: term 1 sits at 60 degrees from term 0,
# term 2 at 90 degrees from term 0.
TRIG_EMBEDDINGS = np.array(
    [
        [1.0, 0.0],
        [0.5, math.sqrt(3.0) / 2.0],
        [0.0, 1.0],
    ]
)


class TestBuildTermSimilarity:
    def test_rows_are_normalized_zero_rows_stay_zero(self):
        raw = np.array([[3.0, 4.0], [0.0, 0.0], [0.0, 2.0]])
        tsm = build_term_similarity(_svd_model(raw))
        np.testing.assert_allclose(tsm.embeddings[0], [0.6, 0.8], atol=1e-15)
        np.testing.assert_array_equal(tsm.embeddings[1], [0.0, 0.0])
        np.testing.assert_allclose(tsm.embeddings[2], [0.0, 1.0], atol=0)

    def test_unit_diagonal_for_nonzero_terms(self):
        rng = np.random.default_rng(5)
        tsm = build_term_similarity(_svd_model(rng.standard_normal((6, 3))))
        for i in range(6):
            basis = _vec(np.eye(6)[i])
            assert tsm.quad_form(basis, basis) == pytest.approx(1.0, abs=1e-12)

    def test_identical_rows_have_similarity_one(self):
        raw = np.array([[1.0, 2.0], [1.0, 2.0], [0.0, 1.0]])
        tsm = build_term_similarity(_svd_model(raw))
        assert tsm.quad_form(_vec([1, 0, 0]), _vec([0, 1, 0])) == pytest.approx(
            1.0, abs=1e-12
        )

    def test_known_angles(self):
        tsm = build_term_similarity(_svd_model(TRIG_EMBEDDINGS))
        s01 = tsm.quad_form(_vec([1, 0, 0]), _vec([0, 1, 0]))
        s02 = tsm.quad_form(_vec([1, 0, 0]), _vec([0, 0, 1]))
        assert s01 == pytest.approx(0.5, abs=1e-12)
        assert s02 == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal_rows_behave_as_identity(self):
        tsm = TermSimilarityMatrix(embeddings=np.eye(4))
        rng = np.random.default_rng(6)
        for _ in range(25):
            u = rng.standard_normal(4)
            v = rng.standard_normal(4)
            assert tsm.quad_form(_vec(u), _vec(v)) == pytest.approx(
                float(np.dot(u, v)), abs=1e-12
            )

    def test_symmetry_of_quad_form(self):
        rng = np.random.default_rng(7)
        tsm = build_term_similarity(_svd_model(rng.standard_normal((8, 3))))
        for _ in range(25):
            u = _vec(rng.standard_normal(8))
            v = _vec(rng.standard_normal(8))
            assert tsm.quad_form(u, v) == pytest.approx(tsm.quad_form(v, u), abs=1e-12)

    def test_dimension_mismatch_rejected(self):
        tsm = TermSimilarityMatrix(embeddings=np.eye(4))
        with pytest.raises(SimilarityError) as excinfo:
            tsm.embed(_vec([1.0, 2.0]))
        assert excinfo.value.code == "dimension-mismatch"


class TestSoftCosine:
    def test_self_similarity_is_exactly_one(self):
        tsm = TermSimilarityMatrix(embeddings=np.eye(3))
        u = _vec([0.3, 0.0, 0.7])
        assert soft_cosine(u, u, tsm) == 1.0

    def test_zero_vector_gives_zero(self):
        tsm = TermSimilarityMatrix(embeddings=np.eye(3))
        zero = _vec([0.0, 0.0, 0.0])
        assert soft_cosine(zero, _vec([1.0, 0.0, 0.0]), tsm) == 0.0
        assert soft_cosine(zero, zero, tsm) == 0.0

    def test_disjoint_supports_hand_arithmetic(self):
        tsm = build_term_similarity(_svd_model(TRIG_EMBEDDINGS))
        a, b, c = 0.8, 0.6, 0.5
        u = _vec([a, 0.0, 0.0])
        v = _vec([0.0, b, c])
        s01 = 0.5
        s12 = math.sqrt(3.0) / 2.0
        numerator = a * b * s01  # term 0 vs terms 1,2; s02 is 0
        vv = b * b + c * c + 2 * b * c * s12
        expected = numerator / math.sqrt(a * a * vv)
        assert soft_cosine(u, v, tsm) == pytest.approx(expected, abs=1e-12)

    def test_embedded_zero_row_vector_guard(self):
        # A vector supported only on a zero embedding row has zero self-form.
        raw = np.array([[0.0, 0.0], [1.0, 0.0]])
        tsm = build_term_similarity(_svd_model(raw))
        u = _vec([1.0, 0.0])
        v = _vec([0.0, 1.0])
        assert soft_cosine(u, v, tsm) == 0.0


class TestSoftCosineProperties:
    def _random_pair(self, rng, tsm_dim):
        u = rng.standard_normal(tsm_dim) * (rng.uniform(size=tsm_dim) > 0.4)
        v = rng.standard_normal(tsm_dim) * (rng.uniform(size=tsm_dim) > 0.4)
        return _vec(u), _vec(v)

    def test_symmetry_exact(self):
        rng = np.random.default_rng(61)
        tsm = build_term_similarity(_svd_model(rng.standard_normal((10, 4))))
        for _ in range(300):
            u, v = self._random_pair(rng, 10)
            assert soft_cosine(u, v, tsm) == soft_cosine(v, u, tsm)

    def test_bound(self):
        rng = np.random.default_rng(62)
        tsm = build_term_similarity(_svd_model(rng.standard_normal((10, 4))))
        for _ in range(300):
            u, v = self._random_pair(rng, 10)
            assert abs(soft_cosine(u, v, tsm)) <= 1 + 1e-12

    def test_orthonormal_degeneration_to_plain_cosine(self):
        rng = np.random.default_rng(63)
        tsm = TermSimilarityMatrix(embeddings=np.eye(9))
        for _ in range(300):
            u, v = self._random_pair(rng, 9)
            du, dv = u.to_dense(), v.to_dense()
            nu, nv = np.linalg.norm(du), np.linalg.norm(dv)
            expected = 0.0 if nu == 0 or nv == 0 else float(du @ dv) / (nu * nv)
            assert soft_cosine(u, v, tsm) == pytest.approx(expected, abs=1e-12)

    def test_positive_scale_invariance(self):
        rng = np.random.default_rng(64)
        tsm = build_term_similarity(_svd_model(rng.standard_normal((10, 4))))
        for _ in range(300):
            u, v = self._random_pair(rng, 10)
            base = soft_cosine(u, v, tsm)
            for c in (1e-3, 0.7, 42.0):
                scaled = SparseVector(dim=u.dim, indices=u.indices, values=u.values * c)
                assert soft_cosine(scaled, v, tsm) == pytest.approx(base, abs=1e-12)


class TestPairFeature:
    def _setup(self):
        rng = np.random.default_rng(71)
        model = _svd_model(rng.standard_normal((12, 4)))
        tsm = build_term_similarity(model)
        return model, tsm

    def test_scm_only_identical_pair(self):
        model, tsm = self._setup()
        u = _vec(np.arange(12) % 3 == 0)
        feature = pair_feature(model, tsm, u, u, mode="scm_only")
        np.testing.assert_array_equal(feature, [1.0])

    def test_concat_is_projections_back_to_back(self):
        model, tsm = self._setup()
        rng = np.random.default_rng(72)
        h = _vec(rng.standard_normal(12))
        b = _vec(rng.standard_normal(12))
        feature = pair_feature(model, tsm, h, b, mode="concat")
        assert feature.shape == (8,)
        np.testing.assert_array_equal(feature[:4], project(model, h))
        np.testing.assert_array_equal(feature[4:], project(model, b))

    def test_concat_scm_composition(self):
        model, tsm = self._setup()
        rng = np.random.default_rng(73)
        h = _vec(rng.standard_normal(12))
        b = _vec(rng.standard_normal(12))
        feature = pair_feature(model, tsm, h, b, mode="concat_scm")
        assert feature.shape == (9,)
        np.testing.assert_array_equal(feature[:4], project(model, h))
        np.testing.assert_array_equal(feature[4:8], project(model, b))
        assert feature[8] == soft_cosine(h, b, tsm)

    def test_default_mode_is_concat_scm(self):
        model, tsm = self._setup()
        h = _vec(np.eye(12)[0])
        b = _vec(np.eye(12)[5])
        np.testing.assert_array_equal(
            pair_feature(model, tsm, h, b),
            pair_feature(model, tsm, h, b, mode="concat_scm"),
        )

    def test_unknown_mode_rejected(self):
        model, tsm = self._setup()
        u = _vec(np.eye(12)[0])
        with pytest.raises(SimilarityError) as excinfo:
            pair_feature(model, tsm, u, u, mode="both")
        assert excinfo.value.code == "unknown-mode"

    def test_feature_dim(self):
        assert feature_dim(64, "scm_only") == 1
        assert feature_dim(64, "concat") == 128
        assert feature_dim(64, "concat_scm") == 129
        with pytest.raises(SimilarityError):
            feature_dim(64, "nope")
        assert set(FEATURE_MODES) == {"scm_only", "concat", "concat_scm"}


class TestEmbedCosine:
    def test_matches_soft_cosine_through_embeddings(self):
        rng = np.random.default_rng(81)
        tsm = build_term_similarity(_svd_model(rng.standard_normal((10, 4))))
        for _ in range(50):
            u = _vec(rng.standard_normal(10))
            v = _vec(rng.standard_normal(10))
            assert embed_cosine(tsm.embed(u), tsm.embed(v)) == soft_cosine(u, v, tsm)
