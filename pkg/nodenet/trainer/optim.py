"""Adaptive-moment updates with decoupled weight decay."""
import logging
from typing import Dict, Tuple

import numpy as np

from neuralnet.structures import NetworkParameters, is_decayed
from .structures import AdamState, TrainConfig

logger = logging.getLogger(__name__)


def adam_step(
    params: NetworkParameters,
    grads: Dict[str, np.ndarray],
    state: AdamState,
    config: TrainConfig,
    t: int,
) -> Tuple[NetworkParameters, AdamState]:
    """
    One bias-corrected Adam update.

    Weight decay is decoupled from the gradient and applies to dense weights
    only, never to biases or batch-norm scale and shift.

    Args:
        params: Current parameters (not modified)
        grads: Gradient per trainable tensor
        state: Moment estimates before this step (not modified)
        config: Learning rate, betas, epsilon and weight decay
        t: 1-based step number used for bias correction

    Returns:
        tuple: (new parameters, new state)
    """
    if t < 1:
        raise ValueError(f"step number must be >= 1, got {t}")
    lr, beta1, beta2 = config.learning_rate, config.beta1, config.beta2
    correction1 = 1.0 - beta1 ** t
    correction2 = 1.0 - beta2 ** t

    updated: Dict[str, np.ndarray] = {}
    new_m: Dict[str, np.ndarray] = {}
    new_v: Dict[str, np.ndarray] = {}
    for name in params.trainable_names():
        value, grad = params[name], grads[name]
        if grad.shape != value.shape:
            raise ValueError(f"gradient for {name} has shape {grad.shape}, expected {value.shape}")
        m = beta1 * state.m[name] + (1.0 - beta1) * grad
        v = beta2 * state.v[name] + (1.0 - beta2) * grad * grad
        step = lr * (m / correction1) / (np.sqrt(v / correction2) + config.adam_epsilon)
        new_value = value - step
        if config.weight_decay and is_decayed(name):
            new_value = new_value - lr * config.weight_decay * value
        updated[name] = new_value.astype(value.dtype, copy=False)
        new_m[name], new_v[name] = m, v
    return params.replaced(updated), AdamState(m=new_m, v=new_v, step=t)
