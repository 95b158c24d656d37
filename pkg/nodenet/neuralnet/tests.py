import math

import numpy as np
import pytest

from core.exceptions import CheckpointError, ConfigError, ShapeError
from core.seeding import make_rng
from neuralnet import layers
from neuralnet.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from neuralnet.services import backward, forward, init_params, predict, predict_proba, softmax_cross_entropy
from neuralnet.structures import Mode, NetworkConfig


def numeric_gradients(params, config, X, upstream_logits, upstream_latent, step=1e-6):
    """Central differences of <upstream, outputs> for every trainable entry."""
    def objective():
        trace = forward(params, config, X, Mode.TRAIN)
        return float(np.sum(trace.logits * upstream_logits) + np.sum(trace.latent * upstream_latent))

    result = {}
    for name in params.trainable_names():
        tensor = params.tensors[name]
        grad = np.zeros_like(tensor)
        for index in np.ndindex(tensor.shape):
            original = tensor[index]
            tensor[index] = original + step
            plus = objective()
            tensor[index] = original - step
            minus = objective()
            tensor[index] = original
            grad[index] = (plus - minus) / (2 * step)
        result[name] = grad
    return result


class TestConfig:
    def test_latent_defaults_to_last_hidden(self):
        config = NetworkConfig(layer_widths=(5, 4, 3, 2))
        assert config.latent_layer == 1
        assert config.latent_width == 3
        assert config.batchnorm == (True, True)

    def test_no_hidden_layers_uses_logits(self):
        config = NetworkConfig(layer_widths=(5, 2), latent_layer=0)
        assert config.latent_layer is None
        assert config.latent_width == 2

    @pytest.mark.parametrize('kwargs', [
        {'layer_widths': (5,)},
        {'layer_widths': (5, 0, 2)},
        {'layer_widths': (5, 4, 2), 'dropout_rate': 1.0},
        {'layer_widths': (5, 4, 2), 'activation': 'swish'},
        {'layer_widths': (5, 4, 2), 'batchnorm': (True, False)},
        {'layer_widths': (5, 4, 2), 'latent_layer': 3},
        {'layer_widths': (5, 4, 2), 'precision': 'float16'},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            NetworkConfig(**kwargs)

    def test_dict_round_trip(self):
        config = NetworkConfig(layer_widths=(6, 4, 3, 2), batchnorm=(True, False), activation='tanh')
        assert NetworkConfig.from_dict(config.to_dict()) == config


class TestInit:
    def test_shapes(self):
        params = init_params(NetworkConfig(layer_widths=(4, 3, 2)), seed=9)
        assert params['W0'].shape == (4, 3)
        assert params['W1'].shape == (3, 2)
        assert params['b0'].shape == (3,)
        assert params['b1'].shape == (2,)
        assert 'gamma0' in params and 'gamma1' not in params
        assert set(params.trainable_names()) == {'W0', 'b0', 'gamma0', 'beta0', 'W1', 'b1'}

    def test_same_seed_same_bits(self):
        config = NetworkConfig(layer_widths=(4, 3, 2))
        first, second = init_params(config, 5), init_params(config, 5)
        assert all(first[name].tobytes() == second[name].tobytes() for name in first.tensors)

    def test_float32(self):
        params = init_params(NetworkConfig(layer_widths=(4, 3, 2), precision='float32'), 0)
        assert params['W0'].dtype == np.float32


class TestForward:
    config = NetworkConfig(layer_widths=(4, 6, 5, 3), dropout_rate=0.0)

    def test_output_shapes_and_probabilities(self):
        X = np.random.default_rng(0).normal(size=(7, 4))
        trace = forward(init_params(self.config, 0), self.config, X, Mode.TRAIN)
        assert trace.logits.shape == (7, 3)
        assert trace.latent.shape == (7, 5)
        assert np.allclose(trace.probabilities.sum(axis=1), 1.0)

    def test_train_mode_does_not_touch_params(self):
        params = init_params(self.config, 0)
        before = params['running_mean0'].copy()
        trace = forward(params, self.config, np.random.default_rng(1).normal(size=(5, 4)), Mode.TRAIN)
        assert np.array_equal(params['running_mean0'], before)
        assert set(trace.running_updates) == {'running_mean0', 'running_var0', 'running_mean1', 'running_var1'}

    def test_width_mismatch(self):
        with pytest.raises(ShapeError):
            forward(init_params(self.config, 0), self.config, np.zeros((3, 5)))

    def test_single_row_train_batch_with_batchnorm(self):
        with pytest.raises(ShapeError):
            forward(init_params(self.config, 0), self.config, np.zeros((1, 4)), Mode.TRAIN)

    def test_single_row_inference(self):
        trace = forward(init_params(self.config, 0), self.config, np.ones((1, 4)), Mode.INFER)
        assert trace.logits.shape == (1, 3)

    def test_dropout_needs_generator(self):
        config = NetworkConfig(layer_widths=(4, 3, 2), dropout_rate=0.5)
        with pytest.raises(ValueError):
            forward(init_params(config, 0), config, np.ones((4, 4)), Mode.TRAIN)

    def test_inference_ignores_dropout(self):
        config = NetworkConfig(layer_widths=(4, 3, 2), dropout_rate=0.5)
        params = init_params(config, 0)
        X = np.random.default_rng(2).normal(size=(6, 4))
        assert np.array_equal(predict_proba(params, config, X), predict_proba(params, config, X))


class TestLayers:
    def test_batchnorm_standardizes_columns(self):
        x = np.random.default_rng(3).normal(loc=4.0, scale=3.0, size=(200, 5))
        out, *_ = layers.batchnorm_train_forward(x, np.ones(5), np.zeros(5), 1e-5)
        assert np.allclose(out.mean(axis=0), 0.0, atol=1e-10)
        assert np.allclose(out.var(axis=0), 1.0, atol=1e-3)

    def test_constant_column_maps_to_zero(self):
        x = np.column_stack([np.full(6, 2.5), np.arange(6.0)])
        out, *_ = layers.batchnorm_train_forward(x, np.ones(2), np.zeros(2), 1e-5)
        assert np.all(out[:, 0] == 0.0)

    def test_dropout_mask_expectation(self):
        mask = layers.dropout_mask((400, 250), 0.3, make_rng(0, 'dropout'), np.float64)
        assert set(np.unique(mask).round(6)) == {0.0, round(1 / 0.7, 6)}
        assert mask.mean() == pytest.approx(1.0, abs=0.02)

    def test_softmax_uniform_for_equal_logits(self):
        assert np.allclose(layers.softmax(np.full((2, 4), 3.7)), 0.25)

    def test_softmax_large_logits_are_finite(self):
        probs = layers.softmax(np.array([[1000.0, 0.0, -1000.0]]))
        assert np.all(np.isfinite(probs))
        assert probs[0, 0] == pytest.approx(1.0)


class TestBackward:
    @pytest.mark.parametrize('batchnorm', [False, True])
    @pytest.mark.parametrize('activation', ['tanh', 'identity'])
    def test_matches_finite_differences(self, batchnorm, activation):
        config = NetworkConfig(
            layer_widths=(4, 5, 3, 3), dropout_rate=0.0, batchnorm=batchnorm, activation=activation, latent_layer=0,
        )
        rng = np.random.default_rng(11)
        params = init_params(config, 1)
        X = rng.normal(size=(6, 4))
        upstream_logits = rng.normal(size=(6, 3))
        upstream_latent = rng.normal(size=(6, 5))
        trace = forward(params, config, X, Mode.TRAIN)
        analytic = backward(trace, params, config, upstream_logits, upstream_latent)
        numeric = numeric_gradients(params, config, X, upstream_logits, upstream_latent)
        for name in params.trainable_names():
            assert np.allclose(analytic[name], numeric[name], rtol=1e-5, atol=1e-7), name

    def test_zero_upstream_gives_zero_gradients(self):
        config = NetworkConfig(layer_widths=(4, 3, 2), dropout_rate=0.0)
        params = init_params(config, 0)
        trace = forward(params, config, np.random.default_rng(0).normal(size=(5, 4)), Mode.TRAIN)
        grads = backward(trace, params, config, np.zeros((5, 2)), np.zeros((5, 3)))
        assert all(not g.any() for g in grads.values())

    def test_bias_feeding_batchnorm_gets_no_gradient(self):
        config = NetworkConfig(layer_widths=(4, 5, 3, 2), dropout_rate=0.0, batchnorm=True)
        params = init_params(config, 0)
        rng = np.random.default_rng(3)
        trace = forward(params, config, rng.normal(size=(6, 4)), Mode.TRAIN)
        grads = backward(trace, params, config, rng.normal(size=(6, 2)))
        assert np.max(np.abs(grads['b0'])) < 1e-10
        assert np.max(np.abs(grads['b1'])) < 1e-10
        assert np.abs(grads['W0']).max() > 1e-6

    def test_fully_dropped_unit_gets_no_weight_gradient(self):
        config = NetworkConfig(layer_widths=(4, 3, 2), dropout_rate=0.5, batchnorm=False)
        params = init_params(config, 0)
        trace = forward(params, config, np.random.default_rng(0).normal(size=(5, 4)), Mode.TRAIN, make_rng(0, 'dropout'))
        # drop hidden unit 1 for every row
        trace.layers[0].dropout_mask[:, 1] = 0.0
        trace.output_inputs[:, 1] = 0.0
        grads = backward(trace, params, config, np.ones((5, 2)))
        assert not grads['W0'][:, 1].any()
        assert not grads['W1'][1].any()

    def test_rejects_inference_trace(self):
        config = NetworkConfig(layer_widths=(4, 3, 2))
        params = init_params(config, 0)
        trace = forward(params, config, np.ones((3, 4)), Mode.INFER)
        with pytest.raises(ValueError):
            backward(trace, params, config, np.zeros((3, 2)))


class TestLoss:
    def test_uniform_logits_seven_classes(self):
        loss, grad = softmax_cross_entropy(np.zeros((1, 7)), np.array([3]))
        assert loss == pytest.approx(math.log(7), abs=1e-9)
        assert loss == pytest.approx(1.94591, abs=1e-5)
        assert grad.sum() == pytest.approx(0.0)

    def test_large_margin_goes_to_zero(self):
        losses = [softmax_cross_entropy(np.array([[m, 0.0, 0.0]]), np.array([0]))[0] for m in (1, 10, 50)]
        assert losses[0] > losses[1] > losses[2]
        assert losses[2] < 1e-20

    def test_label_out_of_range(self):
        with pytest.raises(ValueError):
            softmax_cross_entropy(np.zeros((2, 3)), np.array([0, 3]))

    def test_empty_batch(self):
        loss, grad = softmax_cross_entropy(np.zeros((0, 3)), np.zeros(0, dtype=int))
        assert loss == 0.0 and grad.shape == (0, 3)


class TestPredict:
    def test_argmax_and_tie(self):
        config = NetworkConfig(layer_widths=(3, 3), batchnorm=False)
        params = init_params(config, 0)
        params.tensors['W0'] = np.eye(3)
        params.tensors['b0'] = np.zeros(3)
        X = np.log(np.array([[0.2, 0.5, 0.3], [0.5, 0.5, 1e-9]]))
        assert predict(params, config, X).tolist() == [1, 0]

    def test_batch_composition_does_not_matter(self):
        config = NetworkConfig(layer_widths=(4, 6, 3))
        params = init_params(config, 2)
        X = np.random.default_rng(4).normal(size=(9, 4))
        together = predict(params, config, X)
        alone = np.concatenate([predict(params, config, X[i:i + 1]) for i in range(9)])
        assert np.array_equal(together, alone)


class TestCheckpoint:
    def test_round_trip_is_bit_identical(self, tmp_path):
        config = NetworkConfig(layer_widths=(4, 5, 3), latent_layer=0)
        params = init_params(config, 3)
        original = Checkpoint(
            params=params, config=config, seed=3, epoch=12, optimizer_step=12,
            optimizer_tensors={'adam_m': {'W0': np.ones((4, 5))}}, extra={'dataset': 'cora'},
        )
        path = save_checkpoint(tmp_path / 'run' / 'checkpoint.npz', original)
        loaded = load_checkpoint(path)
        assert loaded.config == config
        assert (loaded.seed, loaded.epoch, loaded.optimizer_step, loaded.extra) == (3, 12, 12, {'dataset': 'cora'})
        assert set(loaded.params.tensors) == set(params.tensors)
        assert all(loaded.params[n].tobytes() == params[n].tobytes() for n in params.tensors)
        assert np.array_equal(loaded.optimizer_tensors['adam_m']['W0'], np.ones((4, 5)))

    def test_missing(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / 'nope.npz')

    def test_garbage(self, tmp_path):
        path = tmp_path / 'bad.npz'
        path.write_bytes(b'not an archive')
        with pytest.raises(CheckpointError):
            load_checkpoint(path)
