"""
Layer primitives with explicit forward and backward passes.

Each ``*_forward`` returns its output and whatever its ``*_backward``
counterpart needs; shapes are ``(batch, width)`` throughout.
"""
from typing import Tuple

import numpy as np


def affine_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    return x @ w + b


def affine_backward(dout: np.ndarray, x: np.ndarray, w: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (dx, dw, db)."""
    return dout @ w.T, x.T @ dout, dout.sum(axis=0)


def batchnorm_train_forward(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float):
    """
    Normalize with batch statistics.

    Returns:
        tuple: (out, normalized, inv_std, batch_mean, batch_var)
    """
    mean = x.mean(axis=0)
    var = x.var(axis=0)
    inv_std = 1.0 / np.sqrt(var + eps)
    normalized = (x - mean) * inv_std
    return normalized * gamma + beta, normalized, inv_std, mean, var


def batchnorm_infer_forward(x, gamma, beta, running_mean, running_var, eps: float) -> np.ndarray:
    return (x - running_mean) / np.sqrt(running_var + eps) * gamma + beta


def batchnorm_backward(dout: np.ndarray, normalized: np.ndarray, inv_std: np.ndarray, gamma: np.ndarray):
    """
    Gradient through train-mode batch normalization, batch statistics included.

    Returns:
        tuple: (dx, dgamma, dbeta)
    """
    n = dout.shape[0]
    dbeta = dout.sum(axis=0)
    dgamma = (dout * normalized).sum(axis=0)
    dnorm = dout * gamma
    dx = (inv_std / n) * (n * dnorm - dnorm.sum(axis=0) - normalized * (dnorm * normalized).sum(axis=0))
    return dx, dgamma, dbeta


def activation_forward(x: np.ndarray, kind: str) -> np.ndarray:
    if kind == 'relu':
        return np.maximum(x, 0.0)
    if kind == 'tanh':
        return np.tanh(x)
    return x.copy()


def activation_backward(dout: np.ndarray, x: np.ndarray, out: np.ndarray, kind: str) -> np.ndarray:
    if kind == 'relu':
        return dout * (x > 0)
    if kind == 'tanh':
        return dout * (1.0 - out ** 2)
    return dout


def dropout_mask(shape, rate: float, rng: np.random.Generator, dtype) -> np.ndarray:
    """Inverted-dropout mask: kept units are scaled by ``1 / (1 - rate)``."""
    keep = rng.random(shape) >= rate
    return keep.astype(dtype) / (1.0 - rate)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)
