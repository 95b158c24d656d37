"""
Feedforward classifier with exact analytic gradients.

Hidden layer order: affine -> batch norm -> activation -> dropout. The output
layer is affine -> softmax. The latent representation is taken after the
activation of ``config.latent_layer`` and before its dropout.
"""
import logging
from typing import Dict, Optional, Tuple

import numpy as np

from core.exceptions import ShapeError
from core.seeding import make_rng
from . import layers
from .structures import ForwardTrace, LayerCache, Mode, NetworkConfig, NetworkParameters

logger = logging.getLogger(__name__)


def init_params(config: NetworkConfig, seed: int) -> NetworkParameters:
    """
    Initialize parameters deterministically from ``seed``.

    Weights are uniform in +-sqrt(6 / (fan_in + fan_out)); biases and shifts are 0,
    scales are 1, running means 0 and running variances 1.
    """
    rng = make_rng(seed, 'init')
    dtype = config.dtype
    tensors: Dict[str, np.ndarray] = {}
    widths = config.layer_widths
    for index in range(config.num_hidden + 1):
        fan_in, fan_out = widths[index], widths[index + 1]
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        tensors[f'W{index}'] = rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype)
        tensors[f'b{index}'] = np.zeros(fan_out, dtype=dtype)
        if index < config.num_hidden and config.batchnorm[index]:
            tensors[f'gamma{index}'] = np.ones(fan_out, dtype=dtype)
            tensors[f'beta{index}'] = np.zeros(fan_out, dtype=dtype)
            tensors[f'running_mean{index}'] = np.zeros(fan_out, dtype=dtype)
            tensors[f'running_var{index}'] = np.ones(fan_out, dtype=dtype)
    return NetworkParameters(tensors)


def forward(
    params: NetworkParameters,
    config: NetworkConfig,
    X: np.ndarray,
    mode=Mode.INFER,
    rng: Optional[np.random.Generator] = None,
) -> ForwardTrace:
    """
    Run the network on a batch.

    Args:
        params: Network parameters (not modified)
        config: Network configuration
        X: batch x f input matrix
        mode: ``train`` uses batch statistics and dropout, ``infer`` neither
        rng: Dropout generator; required in train mode when dropout_rate > 0

    Returns:
        ForwardTrace with logits, probabilities, latent and backprop caches

    Raises:
        ShapeError: On an input width mismatch or a singleton train batch with batch norm
    """
    mode = Mode(mode)
    X = np.asarray(X, dtype=config.dtype)
    if X.ndim != 2 or X.shape[1] != config.input_width:
        raise ShapeError(f"expected input of width {config.input_width}, got shape {X.shape}")
    training = mode is Mode.TRAIN
    use_dropout = training and config.dropout_rate > 0
    if use_dropout and rng is None:
        raise ValueError("train-mode forward with dropout needs a random generator")
    if training and any(config.batchnorm) and X.shape[0] < 2:
        raise ShapeError("batch normalization in train mode needs a batch of at least 2 rows")

    trace_layers = []
    running_updates: Dict[str, np.ndarray] = {}
    latent = None
    hidden = X
    for index in range(config.num_hidden):
        inputs = hidden
        pre_norm = layers.affine_forward(inputs, params[f'W{index}'], params[f'b{index}'])
        normalized = inv_std = None
        if config.batchnorm[index]:
            gamma, beta = params[f'gamma{index}'], params[f'beta{index}']
            if training:
                pre_act, normalized, inv_std, mean, var = layers.batchnorm_train_forward(
                    pre_norm, gamma, beta, config.bn_epsilon
                )
                momentum = config.bn_momentum
                running_updates[f'running_mean{index}'] = (
                    momentum * params[f'running_mean{index}'] + (1.0 - momentum) * mean
                )
                running_updates[f'running_var{index}'] = (
                    momentum * params[f'running_var{index}'] + (1.0 - momentum) * var
                )
            else:
                pre_act = layers.batchnorm_infer_forward(
                    pre_norm, gamma, beta,
                    params[f'running_mean{index}'], params[f'running_var{index}'],
                    config.bn_epsilon,
                )
        else:
            pre_act = pre_norm
        activated = layers.activation_forward(pre_act, config.activation)
        if index == config.latent_layer:
            latent = activated
        mask = None
        if use_dropout:
            mask = layers.dropout_mask(activated.shape, config.dropout_rate, rng, config.dtype)
            hidden = activated * mask
        else:
            hidden = activated
        trace_layers.append(LayerCache(
            inputs=inputs,
            pre_norm=pre_norm,
            normalized=normalized,
            inv_std=inv_std,
            pre_activation=pre_act,
            activation=activated,
            dropout_mask=mask,
        ))

    out_index = config.num_hidden
    logits = layers.affine_forward(hidden, params[f'W{out_index}'], params[f'b{out_index}'])
    if latent is None:
        latent = logits
    return ForwardTrace(
        logits=logits,
        probabilities=layers.softmax(logits),
        latent=latent,
        mode=mode,
        layers=trace_layers,
        output_inputs=hidden,
        running_updates=running_updates,
    )


def backward(
    trace: ForwardTrace,
    params: NetworkParameters,
    config: NetworkConfig,
    upstream_grad_logits: np.ndarray,
    upstream_grad_latent: Optional[np.ndarray] = None,
) -> Dict[str, np.ndarray]:
    """
    Exact gradients of ``<upstream, outputs>`` with respect to every trainable parameter.

    Gradients flow through batch statistics and the stored dropout masks.

    Raises:
        ValueError: If the trace came from an infer-mode pass
    """
    if trace.mode is not Mode.TRAIN:
        raise ValueError("backward needs a train-mode trace")
    grad_logits = np.asarray(upstream_grad_logits, dtype=trace.logits.dtype)
    if grad_logits.shape != trace.logits.shape:
        raise ShapeError(f"logit gradient shape {grad_logits.shape} != {trace.logits.shape}")
    grad_latent = None
    if upstream_grad_latent is not None:
        grad_latent = np.asarray(upstream_grad_latent, dtype=trace.latent.dtype)
        if grad_latent.shape != trace.latent.shape:
            raise ShapeError(f"latent gradient shape {grad_latent.shape} != {trace.latent.shape}")
        if config.latent_layer is None:
            grad_logits = grad_logits + grad_latent

    grads: Dict[str, np.ndarray] = {}
    out_index = config.num_hidden
    dhidden, grads[f'W{out_index}'], grads[f'b{out_index}'] = layers.affine_backward(
        grad_logits, trace.output_inputs, params[f'W{out_index}']
    )

    for index in reversed(range(config.num_hidden)):
        cache = trace.layers[index]
        dact = dhidden * cache.dropout_mask if cache.dropout_mask is not None else dhidden
        if index == config.latent_layer and grad_latent is not None:
            dact = dact + grad_latent
        dpre_act = layers.activation_backward(dact, cache.pre_activation, cache.activation, config.activation)
        if config.batchnorm[index]:
            dpre_norm, grads[f'gamma{index}'], grads[f'beta{index}'] = layers.batchnorm_backward(
                dpre_act, cache.normalized, cache.inv_std, params[f'gamma{index}']
            )
        else:
            dpre_norm = dpre_act
        dhidden, grads[f'W{index}'], grads[f'b{index}'] = layers.affine_backward(
            dpre_norm, cache.inputs, params[f'W{index}']
        )
    return grads


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Mean cross-entropy of softmax(logits) against integer labels.

    Returns:
        tuple: (loss, grad_logits) with grad = (softmax - onehot) / batch

    Raises:
        ValueError: If a label is outside [0, K)
    """
    logits = np.asarray(logits)
    labels = np.asarray(labels, dtype=np.int64)
    batch, num_classes = logits.shape
    if labels.shape != (batch,):
        raise ShapeError(f"expected {batch} labels, got shape {labels.shape}")
    if batch == 0:
        return 0.0, np.zeros_like(logits)
    if labels.min() < 0 or labels.max() >= num_classes:
        raise ValueError(f"labels must lie in [0, {num_classes})")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(batch)
    loss = float(np.mean(log_norm - shifted[rows, labels]))
    grad = np.exp(shifted - log_norm[:, np.newaxis])
    grad[rows, labels] -= 1.0
    return loss, grad / batch


def predict_proba(params: NetworkParameters, config: NetworkConfig, X: np.ndarray) -> np.ndarray:
    return forward(params, config, X, Mode.INFER).probabilities


def predict(params: NetworkParameters, config: NetworkConfig, X: np.ndarray) -> np.ndarray:
    """
    Class index per row from node features alone; ties go to the lowest index.

    Takes no graph argument: inference never depends on edges.
    """
    return np.argmax(predict_proba(params, config, X), axis=1)
