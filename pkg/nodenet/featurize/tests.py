import math

import numpy as np
import pytest

from citegraph.loaders import load_dataset, resolve_dataset_files
from core.exceptions import FeaturizeError, ShapeError
from featurize.services import featurize_dataset, fit_idf, is_binary, transform_mtfidf

TOY_CORPUS = np.array([
    [1, 1, 0, 0],
    [1, 0, 1, 0],
    [0, 0, 1, 0],
])


def brute_force_mtfidf(matrix):
    """Row-by-row evaluation straight from the definition."""
    n_docs = len(matrix)
    out = np.zeros(matrix.shape)
    for i, row in enumerate(matrix):
        n_terms = sum(1 for x in row if x > 0)
        for t, x in enumerate(row):
            if x > 0:
                df = sum(1 for other in matrix if other[t] > 0)
                out[i, t] = (math.log(n_docs / (1 + df)) + 1) / n_terms
    return out


class TestFitIdf:
    def test_reference_values(self):
        corpus = np.array([[1, 1, 0], [1, 1, 0], [1, 0, 0]])
        model = fit_idf(corpus)
        assert model.idf[0] == pytest.approx(0.712318, abs=1e-6)
        assert model.idf[1] == pytest.approx(1.0)
        assert model.idf[2] == pytest.approx(2.09861, abs=1e-5)
        assert model.doc_frequency.tolist() == [3, 2, 0]

    def test_log_base(self):
        model = fit_idf(np.array([[1, 0], [0, 0]]), log_base=10)
        assert model.idf[1] == pytest.approx(math.log10(2) + 1)

    @pytest.mark.parametrize('shape', [(0, 3), (3, 0)])
    def test_empty_matrix(self, shape):
        with pytest.raises(FeaturizeError):
            fit_idf(np.zeros(shape))

    def test_idf_decreases_with_document_frequency(self):
        corpus = (np.random.default_rng(1).random((40, 15)) < 0.3).astype(int)
        model = fit_idf(corpus)
        order = np.argsort(model.doc_frequency, kind='stable')
        assert np.all(np.diff(model.idf[order]) <= 1e-12)


class TestTransform:
    def test_toy_row(self):
        weighted = transform_mtfidf(TOY_CORPUS, fit_idf(TOY_CORPUS))
        assert weighted[0] == pytest.approx([0.5, 0.70273, 0.0, 0.0], abs=1e-5)

    def test_matches_definition(self):
        corpus = (np.random.default_rng(5).random((50, 20)) < 0.2).astype(int)
        corpus[7] = 0
        weighted = transform_mtfidf(corpus, fit_idf(corpus))
        assert np.max(np.abs(weighted - brute_force_mtfidf(corpus))) < 1e-12

    def test_zero_row_stays_zero(self):
        corpus = np.vstack([TOY_CORPUS, np.zeros(4, dtype=int)])
        assert not transform_mtfidf(corpus, fit_idf(corpus))[3].any()

    def test_single_term_document_gets_idf(self):
        model = fit_idf(TOY_CORPUS)
        row = transform_mtfidf(TOY_CORPUS, model)[2]
        assert row[2] == pytest.approx(model.idf[2])
        assert np.count_nonzero(row) == 1

    def test_width_mismatch(self):
        with pytest.raises(ShapeError):
            transform_mtfidf(np.ones((2, 3)), fit_idf(TOY_CORPUS))

    def test_deterministic(self):
        model = fit_idf(TOY_CORPUS)
        assert transform_mtfidf(TOY_CORPUS, model).tobytes() == transform_mtfidf(TOY_CORPUS, model).tobytes()


class TestFeaturizeDataset:
    def test_identity_keeps_bits(self, tiny_dataset):
        graph = load_dataset(*resolve_dataset_files(tiny_dataset, 'tiny'))
        assert featurize_dataset(graph, 'identity').features.tobytes() == graph.features.tobytes()

    def test_mtfidf_preserves_support(self, tiny_dataset):
        graph = load_dataset(*resolve_dataset_files(tiny_dataset, 'tiny'))
        weighted = featurize_dataset(graph, 'mtfidf')
        assert weighted.feature_type == 'mtfidf'
        assert np.all(weighted.features >= 0)
        assert np.array_equal(weighted.features != 0, graph.features != 0)
        assert np.array_equal(weighted.edges, graph.edges)

    def test_cited_only_rows_do_not_change_idf(self, tiny_dataset):
        files = resolve_dataset_files(tiny_dataset, 'tiny')
        plain = featurize_dataset(load_dataset(*files), 'mtfidf')
        extended = featurize_dataset(load_dataset(*files, include_cited_only=True), 'mtfidf')
        assert np.array_equal(extended.features[:30], plain.features)
        assert not extended.features[30].any()

    def test_rejects_real_valued_features(self, tiny_dataset):
        graph = load_dataset(*resolve_dataset_files(tiny_dataset, 'tiny'))
        scaled = featurize_dataset(graph, 'mtfidf')
        assert not is_binary(scaled.features)
        with pytest.raises(FeaturizeError):
            featurize_dataset(scaled, 'mtfidf')

    def test_unknown_mode(self, tiny_dataset):
        graph = load_dataset(*resolve_dataset_files(tiny_dataset, 'tiny'))
        with pytest.raises(ValueError):
            featurize_dataset(graph, 'bm25')
