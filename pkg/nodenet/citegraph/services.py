"""
Split construction, edge partitioning and dataset statistics.
"""
import dataclasses
import logging
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.model_selection import train_test_split

from core.exceptions import SplitError
from core.seeding import make_random_state, make_rng
from .structures import (
    CitationGraph,
    DatasetStats,
    EdgeBucket,
    EdgePartition,
    SplitMasks,
    SplitSpec,
    SplitStrategy,
)

logger = logging.getLogger(__name__)

# (nodes, raw citation lines, features, classes) as published for the canonical datasets
REFERENCE_STATS: Dict[str, Tuple[int, int, int, int]] = {
    'cora': (2708, 5429, 1433, 7),
    'citeseer': (3327, 4732, 3703, 6),
    'pubmed': (19717, 44338, 500, 3),
}


def make_split(graph: CitationGraph, spec: SplitSpec, seed: int) -> SplitMasks:
    """
    Build train/validation/test node sets for ``graph``.

    Only nodes with a ``.content`` row are assigned; cited-only nodes stay
    outside every set.

    Args:
        graph: The citation graph
        spec: Strategy and its counts or fractions
        seed: Any 64-bit integer; the result is a pure function of (graph, spec, seed)

    Returns:
        SplitMasks whose training set covers every class

    Raises:
        SplitError: If the training set cannot hold a node of every class
    """
    if spec.strategy is SplitStrategy.PLANETOID:
        masks = _planetoid_split(graph, spec, seed)
    else:
        masks = _random_split(graph, spec, seed)
    masks.check_against(graph)
    logger.info(
        f"{spec.strategy.value} split of {graph.name or 'graph'} (seed {seed}): "
        f"{masks.train_idx.size} train, {masks.val_idx.size} val, {masks.test_idx.size} test"
    )
    return masks


def _planetoid_split(graph: CitationGraph, spec: SplitSpec, seed: int) -> SplitMasks:
    if spec.per_class * graph.num_classes < graph.num_classes:
        raise SplitError(f"need at least one training node per class, got per_class={spec.per_class}")
    rng = make_rng(seed, 'split')
    candidates = np.arange(graph.num_content_nodes)
    labels = graph.labels[candidates]
    train: List[np.ndarray] = []
    for label in range(graph.num_classes):
        members = candidates[labels == label]
        if members.size < spec.per_class:
            raise SplitError(f"class {label} has {members.size} nodes, fewer than per_class={spec.per_class}")
        train.append(rng.permutation(members)[:spec.per_class])
    train_idx = np.concatenate(train)

    rest = rng.permutation(np.setdiff1d(candidates, train_idx))
    if rest.size < spec.num_val + spec.num_test:
        logger.warning(
            f"only {rest.size} nodes left for {spec.num_val} validation and {spec.num_test} test nodes"
        )
    val_idx = rest[:spec.num_val]
    test_idx = rest[spec.num_val:spec.num_val + spec.num_test]
    return SplitMasks(train_idx=train_idx, val_idx=val_idx, test_idx=test_idx)


def _can_stratify(labels: np.ndarray, train_size: int) -> bool:
    """Whether ``train_test_split(stratify=labels)`` accepts this draw."""
    counts = np.bincount(labels)
    counts = counts[counts > 0]
    return (
        counts.size >= 2
        and counts.min() >= 2
        and train_size >= counts.size
        and labels.size - train_size >= counts.size
    )


def _random_split(graph: CitationGraph, spec: SplitSpec, seed: int) -> SplitMasks:
    candidates = np.arange(graph.num_content_nodes)
    n = candidates.size
    n_train = int(round(spec.train_fraction * n))
    n_val = min(int(round(spec.val_fraction * n)), n - n_train)
    n_test = min(int(round(spec.test_fraction * n)), n - n_train - n_val)
    if n_train < graph.num_classes:
        raise SplitError(f"{n_train} training nodes cannot cover {graph.num_classes} classes")

    # one anchor per class, then the remaining training slots from everything else
    rng = make_rng(seed, 'split')
    labels = graph.labels[candidates]
    anchors = []
    for label in range(graph.num_classes):
        members = candidates[labels == label]
        if members.size == 0:
            raise SplitError(f"class {label} has no nodes")
        anchors.append(rng.choice(members))
    anchors = np.array(anchors, dtype=np.int64)
    pool = np.setdiff1d(candidates, anchors)
    extra = n_train - anchors.size

    if extra == 0:
        picked, rest = np.empty(0, dtype=np.int64), pool
    elif extra >= pool.size:
        picked, rest = pool, np.empty(0, dtype=np.int64)
    else:
        pool_labels = graph.labels[pool]
        picked, rest = train_test_split(
            pool,
            train_size=extra,
            stratify=pool_labels if _can_stratify(pool_labels, extra) else None,
            random_state=make_random_state(seed, 'split'),
        )

    rest = rng.permutation(np.sort(rest))
    return SplitMasks(
        train_idx=np.concatenate([anchors, picked]),
        val_idx=rest[:n_val],
        test_idx=rest[n_val:n_val + n_test],
    )


def partition_edges(graph: CitationGraph, masks: SplitMasks, default_weight: float = 1.0) -> EdgePartition:
    """
    Bucket every edge by the number of labeled (training) endpoints.

    Validation and test nodes count as unlabeled; only training membership matters.
    """
    if not default_weight > 0:
        raise ValueError(f"edge weight must be positive, got {default_weight}")
    labeled = masks.labeled_mask(graph.num_nodes)
    u, v = graph.edges[:, 0], graph.edges[:, 1]
    count = labeled[u].astype(np.int8) + labeled[v].astype(np.int8)

    def bucket(selector: np.ndarray) -> EdgeBucket:
        return EdgeBucket(u=u[selector], v=v[selector], w=np.full(int(selector.sum()), default_weight))

    partition = EdgePartition(ll=bucket(count == 2), lu=bucket(count == 1), uu=bucket(count == 0))
    logger.debug(f"Edge partition: {len(partition.ll)} LL, {len(partition.lu)} LU, {len(partition.uu)} UU")
    return partition


def without_edges(graph: CitationGraph) -> CitationGraph:
    """Return ``graph`` with its edge set removed."""
    return dataclasses.replace(graph, edges=np.empty((0, 2), dtype=np.int64))


def dataset_stats(graph: CitationGraph) -> DatasetStats:
    return DatasetStats(
        name=graph.name,
        nodes=graph.num_nodes,
        edges_raw=graph.raw_edge_count,
        edges_undirected=graph.num_edges,
        features=graph.num_features,
        classes=graph.num_classes,
        feature_type=graph.feature_type,
    )


def reference_mismatches(stats: DatasetStats) -> List[str]:
    """
    Compare ``stats`` with the published row for its dataset.

    Returns an empty list for unknown dataset names or a full match.
    """
    key = stats.name.lower().split('-')[0]
    if key not in REFERENCE_STATS:
        return []
    expected = dict(zip(('nodes', 'edges_raw', 'features', 'classes'), REFERENCE_STATS[key]))
    return [
        f"{field}: expected {value}, got {getattr(stats, field)}"
        for field, value in expected.items()
        if getattr(stats, field) != value
    ]


def stats_frame(rows: Sequence[DatasetStats]) -> pd.DataFrame:
    """Tabulate statistics with one row per dataset."""
    return pd.DataFrame(
        [dataclasses.asdict(row) for row in rows],
        columns=['name', 'nodes', 'edges_raw', 'edges_undirected', 'features', 'classes', 'feature_type'],
    ).rename(columns={'name': 'dataset'})
