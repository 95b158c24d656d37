"""
Training, evaluation and end-to-end gradient checking of the NodeNet objective.

Cost = mean cross-entropy over labeled nodes + graph regularizer over the
LL/LU/UU edge buckets, evaluated on the latent representation.
"""
import logging
import math
import time
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from sklearn.metrics import accuracy_score

from citegraph.services import partition_edges
from citegraph.structures import CitationGraph, EdgePartition, SplitMasks
from core.exceptions import ConfigError, DivergenceError
from core.seeding import make_rng
from graphloss.services import graph_regularizer, total_cost
from graphloss.structures import GraphLossConfig, Metric
from neuralnet.services import backward, forward, init_params, predict, softmax_cross_entropy
from neuralnet.structures import Mode, NetworkConfig, NetworkParameters
from .optim import adam_step
from .structures import (
    AdamState,
    BatchMode,
    EpochRecord,
    GradientCheckReport,
    MetricsLog,
    ToyInstance,
    TrainConfig,
    TrainResult,
)

logger = logging.getLogger(__name__)

GRADCHECK_STEP = 1e-5
# below this magnitude gradient errors are compared in absolute terms; biases
# feeding batch norm have an exact gradient of 0, so only finite-difference noise shows there
GRADCHECK_FLOOR = 1e-3
MAX_TOY_NODES = 20


def _step_cost(
    params: NetworkParameters,
    net_config: NetworkConfig,
    X: np.ndarray,
    labels: np.ndarray,
    labeled_pos: np.ndarray,
    partition: EdgePartition,
    loss_config: GraphLossConfig,
    rows: Optional[np.ndarray],
    rng: Optional[np.random.Generator],
):
    """Forward pass plus both cost terms; returns (trace, supervised, graph, grad_logits, grad_latent)."""
    trace = forward(params, net_config, X, Mode.TRAIN, rng)
    supervised, grad_labeled = softmax_cross_entropy(trace.logits[labeled_pos], labels)
    grad_logits = np.zeros_like(trace.logits)
    grad_logits[labeled_pos] = grad_labeled
    graph_value, grad_latent = graph_regularizer(trace.latent, partition, loss_config, rows=rows)
    return trace, supervised, graph_value, grad_logits, grad_latent


def _sample_active_nodes(
    graph: CitationGraph,
    train_idx: np.ndarray,
    batch_edges: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Endpoints of a uniform edge sample plus an equally sized labeled-node sample, sorted."""
    chosen = []
    if graph.num_edges:
        picked = rng.choice(graph.num_edges, size=min(batch_edges, graph.num_edges), replace=False)
        chosen.append(graph.edges[picked].ravel())
    chosen.append(rng.choice(train_idx, size=min(batch_edges, train_idx.size), replace=False))
    return np.unique(np.concatenate(chosen))


def _accuracy(predictions: np.ndarray, labels: np.ndarray, index: np.ndarray) -> float:
    if index.size == 0:
        return math.nan
    return float(accuracy_score(labels[index], predictions[index]))


def train(
    graph: CitationGraph,
    masks: SplitMasks,
    net_config: NetworkConfig,
    loss_config: GraphLossConfig,
    train_config: TrainConfig,
    edge_weight: float = 1.0,
) -> TrainResult:
    """
    Minimize the NodeNet cost with Adam and early stopping on validation accuracy.

    Args:
        graph: Featurized citation graph
        masks: Split; its training nodes are the labeled set
        net_config: Network shape; input width must match the graph features
        loss_config: Graph regularization settings
        train_config: Optimizer, schedule and seed
        edge_weight: Weight given to every edge

    Returns:
        TrainResult holding the parameters of the best epoch, the metrics log
        and the optimizer state at that epoch

    Raises:
        DivergenceError: If the cost becomes non-finite; carries the epoch index
    """
    masks.check_against(graph)
    partition = partition_edges(graph, masks, edge_weight)
    X = graph.features.astype(net_config.dtype)
    labels = graph.labels
    train_idx = masks.train_idx
    monitor_val = masks.val_idx.size > 0
    if not monitor_val:
        logger.warning("validation set is empty; model selection uses training accuracy")

    params = init_params(net_config, train_config.seed)
    state = AdamState.zeros_like(params)
    dropout_rng = make_rng(train_config.seed, 'dropout')
    sampling_rng = make_rng(train_config.seed, 'sampling')

    if train_config.batch_mode is BatchMode.EDGE_SAMPLED:
        steps_per_epoch = max(1, math.ceil(graph.num_edges / train_config.batch_edges))
    else:
        steps_per_epoch = 1

    log = MetricsLog()
    best_params, best_state = params.copy(), state.copy()
    best_score = -math.inf

    for epoch in range(1, train_config.epochs + 1):
        started = time.perf_counter()
        supervised_sum = graph_sum = 0.0
        for _ in range(steps_per_epoch):
            if train_config.batch_mode is BatchMode.EDGE_SAMPLED:
                rows = _sample_active_nodes(graph, train_idx, train_config.batch_edges, sampling_rng)
                batch = X[rows]
            else:
                rows, batch = None, X
            active = rows if rows is not None else np.arange(graph.num_nodes)
            labeled_pos = np.flatnonzero(np.isin(active, train_idx, assume_unique=True))

            trace, supervised, graph_value, grad_logits, grad_latent = _step_cost(
                params, net_config, batch, labels[active[labeled_pos]], labeled_pos,
                partition, loss_config, rows, dropout_rng,
            )
            try:
                total_cost(supervised, graph_value)
            except DivergenceError as exc:
                logger.error(f"Training diverged at epoch {epoch}: {exc}")
                raise DivergenceError(str(exc), epoch=epoch) from exc

            grads = backward(trace, params, net_config, grad_logits, grad_latent)
            params = params.replaced(trace.running_updates)
            params, state = adam_step(params, grads, state, train_config, state.step + 1)
            supervised_sum += supervised
            graph_sum += graph_value

        supervised_loss = supervised_sum / steps_per_epoch
        graph_loss = graph_sum / steps_per_epoch
        predictions = predict(params, net_config, X)
        record = EpochRecord(
            epoch=epoch,
            total_loss=supervised_loss + graph_loss,
            supervised_loss=supervised_loss,
            graph_loss=graph_loss,
            train_acc=_accuracy(predictions, labels, train_idx),
            val_acc=_accuracy(predictions, labels, masks.val_idx),
            test_acc=_accuracy(predictions, labels, masks.test_idx),
            seconds=time.perf_counter() - started,
        )
        log.append(record)
        logger.debug(
            f"epoch {epoch}: loss {record.total_loss:.5f} (sup {supervised_loss:.5f}, graph {graph_loss:.5f}) "
            f"train {record.train_acc:.4f} val {record.val_acc:.4f}"
        )

        score = record.val_acc if monitor_val else record.train_acc
        if score > best_score:
            best_score = score
            log.best_epoch = epoch
            best_params, best_state = params.copy(), state.copy()
        elif train_config.patience and epoch - log.best_epoch >= train_config.patience:
            logger.info(f"Early stopping at epoch {epoch}; best epoch {log.best_epoch}")
            break

    best = log.best
    logger.info(
        f"Finished training: {len(log)} epochs, best epoch {log.best_epoch} "
        f"(val {best.val_acc:.4f}, test {best.test_acc:.4f})"
    )
    return TrainResult(params=best_params, log=log, optimizer_state=best_state)


def evaluate(
    params: NetworkParameters,
    net_config: NetworkConfig,
    X: np.ndarray,
    labels: np.ndarray,
    index_set: np.ndarray,
) -> float:
    """
    Accuracy of inference-mode predictions on ``index_set``.

    Uses node features only; no graph structure is consulted.

    Raises:
        ValueError: If ``index_set`` is empty
    """
    index_set = np.asarray(index_set, dtype=np.int64)
    if index_set.size == 0:
        raise ValueError("cannot evaluate on an empty index set")
    predictions = predict(params, net_config, np.asarray(X)[index_set])
    return float(accuracy_score(np.asarray(labels)[index_set], predictions))


def make_toy_instance(
    num_nodes: int = 6,
    num_features: int = 4,
    num_classes: int = 2,
    seed: int = 0,
    edge_probability: float = 0.4,
) -> ToyInstance:
    """
    Random small graph whose LL, LU and UU buckets are all non-empty.

    The first half of the nodes is labeled and labels cycle through the classes.
    """
    if not 4 <= num_nodes <= MAX_TOY_NODES:
        raise ConfigError(f"toy instances need 4 to {MAX_TOY_NODES} nodes, got {num_nodes}")
    num_labeled = num_nodes // 2
    if num_labeled < num_classes:
        raise ConfigError(f"{num_labeled} labeled nodes cannot cover {num_classes} classes")
    rng = make_rng(seed, 'toy')
    features = rng.normal(size=(num_nodes, num_features))
    labels = np.arange(num_nodes) % num_classes

    upper = np.triu(rng.random((num_nodes, num_nodes)) < edge_probability, k=1)
    last = num_nodes - 1
    upper[0, 1] = upper[0, last] = upper[last - 1, last] = True
    edges = np.argwhere(upper)

    graph = CitationGraph(
        node_ids=tuple(f"n{i}" for i in range(num_nodes)),
        features=features,
        labels=labels,
        edges=edges,
        num_classes=num_classes,
        label_names=tuple(str(c) for c in range(num_classes)),
        name='toy',
        raw_edge_count=len(edges),
        feature_type='real',
    )
    masks = SplitMasks(
        train_idx=np.arange(num_labeled),
        val_idx=np.empty(0, dtype=np.int64),
        test_idx=np.arange(num_labeled, num_nodes),
    )
    return ToyInstance(graph=graph, masks=masks, partition=partition_edges(graph, masks), seed=seed)


def _kink_signature(trace, net_config: NetworkConfig, instance: ToyInstance, loss_config: GraphLossConfig) -> bytes:
    """Identifies which side of every non-smooth point the current parameters sit on."""
    parts = []
    if net_config.activation == 'relu':
        parts.extend(np.packbits(layer.pre_activation > 0).tobytes() for layer in trace.layers)
    if loss_config.metric is Metric.L1 and not loss_config.is_disabled:
        for _, bucket in instance.partition.buckets():
            parts.append(np.sign(trace.latent[bucket.u] - trace.latent[bucket.v]).astype(np.int8).tobytes())
    return b'|'.join(parts)


def gradient_check(
    net_config: NetworkConfig,
    loss_config: GraphLossConfig,
    toy_instance: ToyInstance,
    gradient_hook: Optional[Callable[[Dict[str, np.ndarray]], Dict[str, np.ndarray]]] = None,
) -> GradientCheckReport:
    """
    Compare analytic gradients of the total cost with central finite differences.

    Every trainable entry is perturbed by ``1e-5 * max(1, |value|)``. Entries
    whose perturbation crosses a rectifier or l1 kink are skipped and counted.
    Relative error is ``|analytic - numeric| / max(|analytic|, |numeric|, 1e-3)``.

    Args:
        net_config: Network under test; dropout must be off and precision float64
        loss_config: Graph regularization under test
        toy_instance: Graph of at most 20 nodes
        gradient_hook: Optional transform applied to the analytic gradients

    Returns:
        GradientCheckReport with the worst relative error and where it occurred
    """
    if net_config.dropout_rate > 0:
        raise ConfigError("gradient checks need dropout_rate = 0")
    if net_config.precision != 'float64':
        raise ConfigError("gradient checks need float64 precision")
    graph = toy_instance.graph
    if graph.num_nodes > MAX_TOY_NODES:
        raise ConfigError(f"toy instance has {graph.num_nodes} nodes, limit is {MAX_TOY_NODES}")

    params = init_params(net_config, toy_instance.seed)
    jitter = make_rng(toy_instance.seed, 'gradcheck')
    for name in params.trainable_names():
        if not name.startswith('W'):
            params.tensors[name] = params[name] + jitter.normal(scale=0.1, size=params[name].shape)

    X = graph.features.astype(np.float64)
    labeled = toy_instance.masks.train_idx
    labels = graph.labels[labeled]

    def evaluate_cost(current: NetworkParameters):
        trace, supervised, graph_value, grad_logits, grad_latent = _step_cost(
            current, net_config, X, labels, labeled, toy_instance.partition, loss_config, None, None,
        )
        return total_cost(supervised, graph_value), trace, grad_logits, grad_latent

    _, trace, grad_logits, grad_latent = evaluate_cost(params)
    analytic = backward(trace, params, net_config, grad_logits, grad_latent)
    if gradient_hook is not None:
        analytic = gradient_hook(analytic)
    baseline = _kink_signature(trace, net_config, toy_instance, loss_config)

    worst, worst_name = 0.0, ''
    checked = skipped = 0
    for name in params.trainable_names():
        tensor = params.tensors[name]
        for index in np.ndindex(tensor.shape):
            original = tensor[index]
            step = GRADCHECK_STEP * max(1.0, abs(original))
            tensor[index] = original + step
            plus, plus_trace, _, _ = evaluate_cost(params)
            tensor[index] = original - step
            minus, minus_trace, _, _ = evaluate_cost(params)
            tensor[index] = original
            if (_kink_signature(plus_trace, net_config, toy_instance, loss_config) != baseline
                    or _kink_signature(minus_trace, net_config, toy_instance, loss_config) != baseline):
                skipped += 1
                continue
            numeric = (plus - minus) / (2.0 * step)
            exact = float(analytic[name][index])
            error = abs(exact - numeric) / max(abs(exact), abs(numeric), GRADCHECK_FLOOR)
            checked += 1
            if error > worst:
                worst, worst_name = error, f"{name}{list(index)}"

    if skipped:
        logger.info(f"Gradient check skipped {skipped} entries at non-smooth points")
    return GradientCheckReport(max_relative_error=worst, worst_parameter=worst_name, checked=checked, skipped=skipped)
