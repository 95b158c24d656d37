import numpy as np
import pytest

from citegraph.loaders import load_dataset, resolve_dataset_files
from citegraph.services import make_split, without_edges
from citegraph.structures import CitationGraph, SplitMasks, SplitSpec
from core.exceptions import ConfigError, DivergenceError
from featurize.services import featurize_dataset
from graphloss.structures import GraphLossConfig
from neuralnet.services import init_params
from neuralnet.structures import NetworkConfig, NetworkParameters
from trainer.optim import adam_step
from trainer.services import evaluate, gradient_check, make_toy_instance, train
from trainer.structures import METRICS_COLUMNS, AdamState, MetricsLog, TrainConfig, default_tolerance

COSINE = GraphLossConfig(alpha_ll=0.2, alpha_lu=0.2, alpha_uu=0.1)


@pytest.fixture
def tiny_graph(tiny_dataset):
    graph = load_dataset(*resolve_dataset_files(tiny_dataset, 'tiny'), name='tiny')
    return featurize_dataset(graph, 'mtfidf')


@pytest.fixture
def tiny_masks(tiny_graph):
    return make_split(tiny_graph, SplitSpec(strategy='random'), seed=0)


def tiny_net(graph, **kwargs):
    kwargs.setdefault('dropout_rate', 0.2)
    return NetworkConfig.for_dataset(graph.num_features, graph.num_classes, hidden_widths=(8,), **kwargs)


def separable_graph():
    features = np.array([
        [-2.0, -1.0], [-1.5, 0.5], [-1.0, -0.2], [-2.5, 1.0],
        [2.0, 1.0], [1.5, -0.5], [1.0, 0.3], [2.5, -1.0],
    ])
    return CitationGraph(
        node_ids=tuple(f"s{i}" for i in range(8)),
        features=features,
        labels=np.array([0, 0, 0, 0, 1, 1, 1, 1]),
        edges=np.array([[0, 1], [2, 3], [4, 5], [6, 7]]),
        num_classes=2,
        label_names=('neg', 'pos'),
        name='separable',
    )


class TestAdam:
    def params(self):
        return NetworkParameters({'W0': np.array([[0.5, -0.25], [1.0, 2.0]]), 'b0': np.array([0.1, -0.1])})

    def test_first_step_moves_by_learning_rate(self):
        params = self.params()
        grads = {'W0': np.array([[3.0, -0.2], [0.1, -40.0]]), 'b0': np.array([-1.0, 0.5])}
        config = TrainConfig(learning_rate=0.01, weight_decay=0.0)
        updated, state = adam_step(params, grads, AdamState.zeros_like(params), config, 1)
        for name in ('W0', 'b0'):
            assert np.allclose(updated[name] - params[name], -0.01 * np.sign(grads[name]), atol=1e-7)
        assert state.step == 1

    def test_zero_gradients_are_a_fixed_point(self):
        params = self.params()
        grads = {name: np.zeros_like(params[name]) for name in params.tensors}
        updated, _ = adam_step(params, grads, AdamState.zeros_like(params), TrainConfig(weight_decay=0.0), 1)
        assert all(np.array_equal(updated[n], params[n]) for n in params.tensors)

    def test_weight_decay_only_on_weights(self):
        params = self.params()
        grads = {name: np.zeros_like(params[name]) for name in params.tensors}
        config = TrainConfig(learning_rate=0.1, weight_decay=0.5)
        updated, _ = adam_step(params, grads, AdamState.zeros_like(params), config, 1)
        assert np.allclose(updated['W0'], params['W0'] * (1 - 0.05))
        assert np.array_equal(updated['b0'], params['b0'])

    def test_inputs_untouched(self):
        params = self.params()
        state = AdamState.zeros_like(params)
        grads = {name: np.ones_like(params[name]) for name in params.tensors}
        adam_step(params, grads, state, TrainConfig(), 1)
        assert not state.m['W0'].any()
        assert np.array_equal(params['W0'], self.params()['W0'])

    def test_step_number_must_be_positive(self):
        params = self.params()
        with pytest.raises(ValueError):
            adam_step(params, {}, AdamState.zeros_like(params), TrainConfig(), 0)


class TestTrainConfig:
    @pytest.mark.parametrize('kwargs', [
        {'learning_rate': 0}, {'beta1': 1.0}, {'epochs': 0}, {'patience': -1}, {'batch_mode': 'minibatch'},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises((ConfigError, ValueError)):
            TrainConfig(**kwargs)


class TestTrain:
    def test_separable_set_is_learned(self):
        graph = separable_graph()
        masks = SplitMasks(train_idx=np.array([0, 1, 2, 4, 5, 6]), val_idx=np.array([3, 7]), test_idx=np.array([], dtype=int))
        net = NetworkConfig(layer_widths=(2, 4, 2), dropout_rate=0.0, batchnorm=False, activation='tanh')
        config = TrainConfig(learning_rate=0.05, epochs=200, patience=0, weight_decay=0.0)
        result = train(graph, masks, net, GraphLossConfig(), config)
        assert max(r.train_acc for r in result.log.records) == 1.0

    def test_patience_zero_runs_every_epoch(self, tiny_graph, tiny_masks):
        result = train(tiny_graph, tiny_masks, tiny_net(tiny_graph), COSINE, TrainConfig(epochs=12, patience=0))
        assert len(result.log) == 12
        assert [r.epoch for r in result.log.records] == list(range(1, 13))

    def test_early_stopping_picks_earliest_best(self, tiny_graph, tiny_masks):
        result = train(tiny_graph, tiny_masks, tiny_net(tiny_graph), COSINE, TrainConfig(epochs=200, patience=3))
        val = [r.val_acc for r in result.log.records]
        assert result.log.best_epoch == int(np.argmax(val)) + 1
        if len(result.log) < 200:
            assert len(result.log) - result.log.best_epoch == 3

    def test_same_seed_same_run(self, tiny_graph, tiny_masks, tmp_path):
        config = TrainConfig(epochs=8, patience=0, seed=5)
        first = train(tiny_graph, tiny_masks, tiny_net(tiny_graph), COSINE, config)
        second = train(tiny_graph, tiny_masks, tiny_net(tiny_graph), COSINE, config)
        first.log.write_csv(tmp_path / 'a.csv')
        second.log.write_csv(tmp_path / 'b.csv')
        assert (tmp_path / 'a.csv').read_bytes() == (tmp_path / 'b.csv').read_bytes()
        assert all(first.params[n].tobytes() == second.params[n].tobytes() for n in first.params.tensors)

    def test_loss_decomposes(self, tiny_graph, tiny_masks):
        result = train(tiny_graph, tiny_masks, tiny_net(tiny_graph), COSINE, TrainConfig(epochs=5, patience=0))
        for record in result.log.records:
            assert record.total_loss == record.supervised_loss + record.graph_loss
            assert record.graph_loss > 0

    def test_zero_alpha_ignores_edges(self, tiny_graph, tiny_masks):
        config = TrainConfig(epochs=6, patience=0)
        with_edges = train(tiny_graph, tiny_masks, tiny_net(tiny_graph), GraphLossConfig(), config)
        bare = train(without_edges(tiny_graph), tiny_masks, tiny_net(tiny_graph), GraphLossConfig(), config)
        assert with_edges.log.to_frame().equals(bare.log.to_frame())
        assert all(r.graph_loss == 0.0 for r in with_edges.log.records)

    def test_edge_sampled_batches(self, tiny_graph, tiny_masks):
        config = TrainConfig(epochs=4, patience=0, batch_mode='edge_sampled', batch_edges=8)
        first = train(tiny_graph, tiny_masks, tiny_net(tiny_graph), COSINE, config)
        second = train(tiny_graph, tiny_masks, tiny_net(tiny_graph), COSINE, config)
        assert len(first.log) == 4
        assert first.optimizer_state.step % 4 == 0
        assert first.log.to_frame().equals(second.log.to_frame())

    def test_divergence_reports_epoch(self, tiny_graph, tiny_masks):
        features = np.array(tiny_graph.features)
        features[0, 0] = np.inf
        broken = CitationGraph(
            node_ids=tiny_graph.node_ids, features=features, labels=tiny_graph.labels, edges=tiny_graph.edges,
            num_classes=tiny_graph.num_classes, label_names=tiny_graph.label_names,
        )
        with pytest.raises(DivergenceError) as excinfo:
            train(broken, tiny_masks, tiny_net(tiny_graph), COSINE, TrainConfig(epochs=3))
        assert excinfo.value.epoch == 1

    def test_metrics_frame_columns(self, tiny_graph, tiny_masks):
        result = train(tiny_graph, tiny_masks, tiny_net(tiny_graph), COSINE, TrainConfig(epochs=2, patience=0))
        frame = result.log.to_frame()
        assert list(frame.columns) == METRICS_COLUMNS
        assert (frame['seconds'] == 0.0).all()
        assert (result.log.to_frame(record_seconds=True)['seconds'] >= 0).all()

    def test_metrics_log_rejects_gaps(self):
        log = MetricsLog()
        with pytest.raises(ValueError):
            log.append(type('Record', (), {'epoch': 2})())


class TestEvaluate:
    def test_constant_predictions_on_balanced_labels(self):
        config = NetworkConfig(layer_widths=(3, 7))
        params = init_params(config, 0)
        params.tensors['W0'] = np.zeros((3, 7))
        params.tensors['b0'] = np.eye(7)[0]
        X = np.random.default_rng(0).normal(size=(14, 3))
        labels = np.arange(14) % 7
        assert evaluate(params, config, X, labels, np.arange(14)) == pytest.approx(1 / 7)
        assert evaluate(params, config, X, labels, np.array([0, 7])) == 1.0

    def test_does_not_depend_on_other_nodes(self, tiny_graph, tiny_masks):
        result = train(tiny_graph, tiny_masks, tiny_net(tiny_graph), COSINE, TrainConfig(epochs=3, patience=0))
        net = tiny_net(tiny_graph)
        X, labels = tiny_graph.features, tiny_graph.labels
        test = tiny_masks.test_idx
        full = evaluate(result.params, net, X, labels, test)
        subset = evaluate(result.params, net, X[test], labels[test], np.arange(test.size))
        assert full == subset

    def test_empty_index_set(self):
        config = NetworkConfig(layer_widths=(3, 2))
        with pytest.raises(ValueError):
            evaluate(init_params(config, 0), config, np.zeros((2, 3)), np.zeros(2, dtype=int), np.array([], dtype=int))


class TestGradientCheck:
    def test_toy_instance_has_every_bucket(self):
        instance = make_toy_instance()
        assert all(len(bucket) for _, bucket in instance.partition.buckets())

    def test_toy_instance_size_limit(self):
        with pytest.raises(ConfigError):
            make_toy_instance(num_nodes=25)

    def test_plain_classifier(self):
        net = NetworkConfig(layer_widths=(4, 5, 3, 2), dropout_rate=0.0, batchnorm=False)
        report = gradient_check(net, GraphLossConfig(), make_toy_instance())
        assert report.max_relative_error < 1e-5
        assert report.checked > 0

    @pytest.mark.parametrize('metric', ['cosine', 'l2', 'l1'])
    def test_graph_terms(self, metric):
        net = NetworkConfig(layer_widths=(4, 5, 3, 2), dropout_rate=0.0, batchnorm=False)
        loss = GraphLossConfig(alpha_ll=0.5, alpha_lu=0.5, alpha_uu=0.5, metric=metric)
        report = gradient_check(net, loss, make_toy_instance())
        assert report.passed(default_tolerance(net.batchnorm))

    def test_with_batchnorm(self):
        net = NetworkConfig(layer_widths=(4, 5, 3, 2), dropout_rate=0.0, batchnorm=True)
        loss = GraphLossConfig(alpha_ll=0.5, alpha_lu=0.5, alpha_uu=0.5)
        report = gradient_check(net, loss, make_toy_instance(num_nodes=8))
        assert report.max_relative_error < 1e-4

    def test_corrupted_gradient_is_caught(self):
        net = NetworkConfig(layer_widths=(4, 5, 2), dropout_rate=0.0, batchnorm=False, activation='tanh')

        def corrupt(grads):
            grads = dict(grads)
            grads['b0'] = grads['b0'] + 0.5
            return grads

        report = gradient_check(net, GraphLossConfig(), make_toy_instance(), gradient_hook=corrupt)
        assert not report.passed(1e-5)
        assert report.worst_parameter.startswith('b0')

    @pytest.mark.parametrize('kwargs', [{'dropout_rate': 0.5}, {'dropout_rate': 0.0, 'precision': 'float32'}])
    def test_refuses_noisy_settings(self, kwargs):
        net = NetworkConfig(layer_widths=(4, 3, 2), **kwargs)
        with pytest.raises(ConfigError):
            gradient_check(net, GraphLossConfig(), make_toy_instance())
