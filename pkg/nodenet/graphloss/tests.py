import math

import numpy as np
import pytest

from citegraph.structures import EdgeBucket, EdgePartition
from core.exceptions import ConfigError, DivergenceError, ShapeError
from graphloss.services import graph_regularizer, metric_gradient, metric_value, pairwise_metric, total_cost
from graphloss.structures import GraphLossConfig, Metric


def bucket(pairs, weight=1.0):
    pairs = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    return EdgeBucket(u=pairs[:, 0], v=pairs[:, 1], w=np.full(len(pairs), weight))


def partition(ll=(), lu=(), uu=()):
    return EdgePartition(ll=bucket(ll), lu=bucket(lu), uu=bucket(uu))


def brute_force_regularizer(latents, parts, config):
    total = 0.0
    for name, edges in parts.buckets():
        terms = [w * metric_value(config.metric, latents[u], latents[v], config.cosine_epsilon, config.raw_cosine)
                 for u, v, w in edges]
        if terms:
            scale = config.alphas[name] / (len(terms) if config.reduction.value == 'mean' else 1)
            total += scale * sum(terms)
    return total


class TestMetricValue:
    def test_orthogonal_cosine(self):
        assert metric_value('cosine', [1, 0], [0, 1]) == pytest.approx(1.0)

    def test_cosine_reference(self):
        assert metric_value('cosine', [1, 2, 3], [4, 5, 6]) == pytest.approx(0.02537, abs=1e-5)
        similarity = 32 / (math.sqrt(14) * math.sqrt(77))
        assert metric_value('cosine', [1, 2, 3], [4, 5, 6], raw_cosine=True) == pytest.approx(similarity)

    def test_l1_and_l2(self):
        assert metric_value('l1', [1, -2], [4, 2]) == pytest.approx(7.0)
        assert metric_value('l2', [1, -2], [4, 2]) == pytest.approx(5.0)

    @pytest.mark.parametrize('metric', list(Metric))
    def test_symmetric_and_zero_on_self(self, metric):
        rng = np.random.default_rng(0)
        a, b = rng.normal(size=6), rng.normal(size=6)
        assert metric_value(metric, a, b) == pytest.approx(metric_value(metric, b, a))
        assert metric_value(metric, a, a) == pytest.approx(0.0, abs=1e-12)
        assert metric_value(metric, a, b) >= 0

    def test_cosine_scale_invariant(self):
        a, b = np.array([0.3, -1.2, 2.0]), np.array([1.0, 0.5, -0.7])
        assert metric_value('cosine', 3.5 * a, 0.2 * b) == pytest.approx(metric_value('cosine', a, b))

    def test_cosine_zero_vector_is_finite(self):
        assert metric_value('cosine', [0, 0], [1, 1]) == pytest.approx(1.0)

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            metric_value('l2', [1, 2], [1, 2, 3])

    def test_vectorized_rows(self):
        A = np.array([[1.0, 0.0], [3.0, 4.0]])
        B = np.array([[0.0, 1.0], [0.0, 0.0]])
        assert pairwise_metric('l2', A, B).tolist() == pytest.approx([math.sqrt(2), 5.0])


class TestMetricGradient:
    def test_l1_tie_coordinate_zeroed(self):
        grad_a, grad_b = metric_gradient('l1', [3, 1], [1, 1])
        assert grad_a.tolist() == [1.0, 0.0]
        assert grad_b.tolist() == [-1.0, 0.0]

    def test_cosine_minimum(self):
        grad_a, grad_b = metric_gradient('cosine', [1, 2, 2], [1, 2, 2])
        assert np.allclose(grad_a, 0.0, atol=1e-12)
        assert np.allclose(grad_b, 0.0, atol=1e-12)

    def test_l2_at_coincident_points(self):
        grad_a, grad_b = metric_gradient('l2', [1, 1], [1, 1])
        assert not grad_a.any() and not grad_b.any()

    @pytest.mark.parametrize('metric', list(Metric))
    @pytest.mark.parametrize('raw_cosine', [False, True])
    def test_matches_finite_differences(self, metric, raw_cosine):
        rng = np.random.default_rng(2)
        a, b = rng.normal(size=5), rng.normal(size=5)
        grad_a, grad_b = metric_gradient(metric, a, b, raw_cosine=raw_cosine)
        step = 1e-6
        for i in range(5):
            offset = np.zeros(5)
            offset[i] = step
            numeric_a = (metric_value(metric, a + offset, b, raw_cosine=raw_cosine)
                         - metric_value(metric, a - offset, b, raw_cosine=raw_cosine)) / (2 * step)
            numeric_b = (metric_value(metric, a, b + offset, raw_cosine=raw_cosine)
                         - metric_value(metric, a, b - offset, raw_cosine=raw_cosine)) / (2 * step)
            assert grad_a[i] == pytest.approx(numeric_a, abs=1e-6)
            assert grad_b[i] == pytest.approx(numeric_b, abs=1e-6)


class TestConfig:
    def test_negative_alpha(self):
        with pytest.raises(ConfigError):
            GraphLossConfig(alpha_ll=-0.1)

    def test_labels(self):
        assert GraphLossConfig().label == 'baseline'
        assert GraphLossConfig(alpha_uu=0.2, metric='l1').label == 'l1'


class TestRegularizer:
    def test_disabled(self):
        latents = np.random.default_rng(0).normal(size=(4, 3))
        value, grad = graph_regularizer(latents, partition(ll=[(0, 1)], uu=[(2, 3)]), GraphLossConfig())
        assert value == 0.0
        assert grad.shape == latents.shape and not grad.any()

    def test_identical_rows_cost_nothing(self):
        latents = np.array([[1.0, 2.0], [1.0, 2.0]])
        value, _ = graph_regularizer(latents, partition(ll=[(0, 1)]), GraphLossConfig(alpha_ll=1.0))
        assert value == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize('metric', list(Metric))
    @pytest.mark.parametrize('reduction', ['mean', 'sum'])
    def test_matches_brute_force(self, metric, reduction):
        rng = np.random.default_rng(4)
        latents = rng.normal(size=(8, 4))
        parts = partition(ll=[(0, 1), (1, 2)], lu=[(2, 5), (0, 6), (3, 7)], uu=[(5, 6)])
        config = GraphLossConfig(alpha_ll=0.3, alpha_lu=0.7, alpha_uu=1.1, metric=metric, reduction=reduction)
        value, _ = graph_regularizer(latents, parts, config)
        assert value == pytest.approx(brute_force_regularizer(latents, parts, config), rel=1e-12)

    def test_alphas_are_additive(self):
        latents = np.random.default_rng(5).normal(size=(6, 3))
        parts = partition(ll=[(0, 1)], lu=[(1, 4)], uu=[(3, 5), (4, 5)])
        per_bucket = [
            graph_regularizer(latents, parts, GraphLossConfig(**{f'alpha_{name}': 0.4}))[0]
            for name in ('ll', 'lu', 'uu')
        ]
        combined, _ = graph_regularizer(latents, parts, GraphLossConfig(alpha_ll=0.4, alpha_lu=0.4, alpha_uu=0.4))
        assert combined == pytest.approx(sum(per_bucket))

    @pytest.mark.parametrize('metric', list(Metric))
    def test_gradient_matches_finite_differences(self, metric):
        rng = np.random.default_rng(6)
        latents = rng.normal(size=(6, 3))
        parts = partition(ll=[(0, 1)], lu=[(1, 3), (0, 4)], uu=[(3, 5), (2, 4)])
        config = GraphLossConfig(alpha_ll=0.5, alpha_lu=0.25, alpha_uu=2.0, metric=metric)
        _, grad = graph_regularizer(latents, parts, config)
        step = 1e-6
        for index in np.ndindex(latents.shape):
            shifted = latents.copy()
            shifted[index] += step
            plus, _ = graph_regularizer(shifted, parts, config)
            shifted[index] -= 2 * step
            minus, _ = graph_regularizer(shifted, parts, config)
            assert grad[index] == pytest.approx((plus - minus) / (2 * step), abs=1e-6)

    def test_batch_rows_drop_outside_edges(self):
        latents = np.random.default_rng(7).normal(size=(5, 3))
        parts = partition(ll=[(0, 1)], lu=[(1, 2), (3, 4)])
        config = GraphLossConfig(alpha_ll=1.0, alpha_lu=1.0, reduction='sum')
        rows = np.array([0, 1, 2])
        batch_value, batch_grad = graph_regularizer(latents[rows], parts, config, rows=rows)
        reduced = partition(ll=[(0, 1)], lu=[(1, 2)])
        full_value, full_grad = graph_regularizer(latents, reduced, config)
        assert batch_value == pytest.approx(full_value)
        assert np.allclose(batch_grad, full_grad[rows])

    def test_edge_weights_scale_terms(self):
        latents = np.random.default_rng(8).normal(size=(2, 3))
        config = GraphLossConfig(alpha_ll=1.0, metric='l2')
        light, _ = graph_regularizer(latents, EdgePartition(bucket([(0, 1)]), bucket([]), bucket([])), config)
        heavy, _ = graph_regularizer(latents, EdgePartition(bucket([(0, 1)], 3.0), bucket([]), bucket([])), config)
        assert heavy == pytest.approx(3.0 * light)


class TestTotalCost:
    def test_sum(self):
        assert total_cost(0.0, 0.0) == 0.0
        assert total_cost(1.9459, 0.0) == pytest.approx(1.9459)
        assert total_cost(0.25, 0.5) == 0.75

    @pytest.mark.parametrize('pair', [(math.nan, 0.0), (0.0, math.inf)])
    def test_non_finite(self, pair):
        with pytest.raises(DivergenceError):
            total_cost(*pair)
