"""
Graph regularization over labeled/unlabeled edge buckets.

The regularizer is ``sum_b alpha_b * R_b`` where ``R_b`` is the (optionally
averaged) weighted distance between the latent rows of every edge in bucket
``b``. All metric code is row-vectorized; the single-pair functions wrap it.
"""
import logging
import math
from typing import Optional, Tuple

import numpy as np

from citegraph.structures import EdgePartition
from core.exceptions import DivergenceError, ShapeError
from .structures import GraphLossConfig, Metric, Reduction

logger = logging.getLogger(__name__)


def _check_pair(A: np.ndarray, B: np.ndarray) -> None:
    if A.shape != B.shape:
        raise ShapeError(f"vector shapes differ: {A.shape} vs {B.shape}")
    if A.shape[-1] < 1:
        raise ShapeError("vectors must have at least one entry")


def pairwise_metric(metric, A: np.ndarray, B: np.ndarray, eps: float = 1e-12, raw_cosine: bool = False) -> np.ndarray:
    """Distance between matching rows of ``A`` and ``B``."""
    metric = Metric(metric)
    _check_pair(A, B)
    if metric is Metric.L1:
        return np.abs(A - B).sum(axis=-1)
    if metric is Metric.L2:
        return np.sqrt(((A - B) ** 2).sum(axis=-1))
    norm_a = np.maximum(np.linalg.norm(A, axis=-1), eps)
    norm_b = np.maximum(np.linalg.norm(B, axis=-1), eps)
    similarity = (A * B).sum(axis=-1) / (norm_a * norm_b)
    return similarity if raw_cosine else 1.0 - similarity


def pairwise_metric_gradient(metric, A: np.ndarray, B: np.ndarray, eps: float = 1e-12, raw_cosine: bool = False):
    """
    Row-wise gradients of ``pairwise_metric`` with respect to ``A`` and ``B``.

    Non-differentiable points get the zero subgradient: per coordinate for l1
    where ``a_i == b_i``, the whole vector for l2 where ``a == b``.
    """
    metric = Metric(metric)
    _check_pair(A, B)
    diff = A - B
    if metric is Metric.L1:
        grad = np.sign(diff)
        return grad, -grad
    if metric is Metric.L2:
        dist = np.sqrt((diff ** 2).sum(axis=-1, keepdims=True))
        grad = np.divide(diff, dist, out=np.zeros_like(diff), where=dist > 0)
        return grad, -grad

    raw_a = np.linalg.norm(A, axis=-1, keepdims=True)
    raw_b = np.linalg.norm(B, axis=-1, keepdims=True)
    norm_a = np.maximum(raw_a, eps)
    norm_b = np.maximum(raw_b, eps)
    dot = (A * B).sum(axis=-1, keepdims=True)
    denom = norm_a * norm_b
    # a clamped norm is a constant, so its derivative term drops out
    grad_a = B / denom - np.where(raw_a > eps, dot * A / (norm_a ** 3 * norm_b), 0.0)
    grad_b = A / denom - np.where(raw_b > eps, dot * B / (norm_b ** 3 * norm_a), 0.0)
    if raw_cosine:
        return grad_a, grad_b
    return -grad_a, -grad_b


def metric_value(metric, a, b, eps: float = 1e-12, raw_cosine: bool = False) -> float:
    """
    Distance between two vectors.

    l1 is the sum of absolute differences, l2 the Euclidean norm of the
    difference and cosine the penalty ``1 - a.b / (max(|a|, eps) max(|b|, eps))``.
    """
    A = np.atleast_2d(np.asarray(a, dtype=np.float64))
    B = np.atleast_2d(np.asarray(b, dtype=np.float64))
    return float(pairwise_metric(metric, A, B, eps, raw_cosine)[0])


def metric_gradient(metric, a, b, eps: float = 1e-12, raw_cosine: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    A = np.atleast_2d(np.asarray(a, dtype=np.float64))
    B = np.atleast_2d(np.asarray(b, dtype=np.float64))
    grad_a, grad_b = pairwise_metric_gradient(metric, A, B, eps, raw_cosine)
    return grad_a[0], grad_b[0]


def graph_regularizer(
    latents: np.ndarray,
    partition: EdgePartition,
    config: GraphLossConfig,
    rows: Optional[np.ndarray] = None,
) -> Tuple[float, np.ndarray]:
    """
    Weighted graph term and its gradient with respect to ``latents``.

    Args:
        latents: One latent vector per row
        partition: LL/LU/UU edge buckets over global node indices
        config: Alphas, metric and reduction
        rows: Global node index of each latent row; ``None`` means row i is node i.
            Edges with an endpoint outside ``rows`` contribute nothing.

    Returns:
        tuple: (value, grad_latents)
    """
    latents = np.asarray(latents)
    grad = np.zeros_like(latents)
    if config.is_disabled:
        return 0.0, grad

    position = None
    if rows is not None:
        rows = np.asarray(rows, dtype=np.int64)
        size = max(int(rows.max()) + 1 if rows.size else 0, _max_node(partition) + 1)
        position = np.full(size, -1, dtype=np.int64)
        position[rows] = np.arange(rows.size)

    total = 0.0
    for name, bucket in partition.buckets():
        alpha = config.alphas[name]
        if alpha == 0 or len(bucket) == 0:
            continue
        u, v, w = bucket.u, bucket.v, bucket.w
        if position is not None:
            pu, pv = position[u], position[v]
            keep = (pu >= 0) & (pv >= 0)
            u, v, w = pu[keep], pv[keep], w[keep]
        if u.size == 0:
            continue
        A, B = latents[u], latents[v]
        distances = pairwise_metric(config.metric, A, B, config.cosine_epsilon, config.raw_cosine)
        grad_a, grad_b = pairwise_metric_gradient(config.metric, A, B, config.cosine_epsilon, config.raw_cosine)
        scale = alpha / u.size if config.reduction is Reduction.MEAN else alpha
        total += scale * float(np.dot(w, distances))
        weights = (scale * w)[:, np.newaxis]
        np.add.at(grad, u, weights * grad_a)
        np.add.at(grad, v, weights * grad_b)
    return total, grad


def _max_node(partition: EdgePartition) -> int:
    highest = -1
    for _, bucket in partition.buckets():
        if len(bucket):
            highest = max(highest, int(bucket.u.max()), int(bucket.v.max()))
    return highest


def total_cost(supervised_loss: float, regularizer_value: float) -> float:
    """
    Supervised loss plus graph term.

    Raises:
        DivergenceError: If either term is not finite
    """
    if not (math.isfinite(supervised_loss) and math.isfinite(regularizer_value)):
        raise DivergenceError(f"non-finite cost (supervised={supervised_loss}, graph={regularizer_value})")
    return supervised_loss + regularizer_value
