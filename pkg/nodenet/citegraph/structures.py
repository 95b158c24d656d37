"""
Domain types for citation graphs.

All arrays handed out by these types are read-only; build a new value with
``dataclasses.replace`` instead of mutating one.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Set, Tuple

import numpy as np

from core.exceptions import DatasetFormatError, SplitError


def _frozen(array: np.ndarray, dtype=None) -> np.ndarray:
    array = np.array(array, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class CitationGraph:
    """
    A node-labeled citation graph.

    ``edges`` is an ``m x 2`` array of unordered pairs stored with ``u < v``,
    sorted, without duplicates or self-loops.

    The last ``num_cited_only`` nodes appear only in citation lines: they have
    all-zero features, a placeholder label 0 and never enter a split.
    """
    node_ids: Tuple[str, ...]
    features: np.ndarray
    labels: np.ndarray
    edges: np.ndarray
    num_classes: int
    label_names: Tuple[str, ...] = ()
    name: str = ''
    raw_edge_count: int = 0
    feature_type: str = 'binary'
    num_cited_only: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'features', _frozen(self.features))
        object.__setattr__(self, 'labels', _frozen(self.labels, dtype=np.int64))
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, 'edges', _frozen(edges))
        self.validate()

    @property
    def num_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def num_content_nodes(self) -> int:
        """Nodes with a ``.content`` row; indices ``0 .. num_content_nodes - 1``."""
        return self.num_nodes - self.num_cited_only

    @property
    def num_features(self) -> int:
        return int(self.features.shape[1])

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    def edge_set(self) -> Set[Tuple[int, int]]:
        return {(int(u), int(v)) for u, v in self.edges}

    def validate(self) -> None:
        n = self.num_nodes
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise DatasetFormatError(f"features must be {n} x f, got {self.features.shape}")
        if self.labels.shape != (n,):
            raise DatasetFormatError(f"labels must have length {n}, got {self.labels.shape}")
        if self.num_classes < 2:
            raise DatasetFormatError(f"num_classes must be at least 2, got {self.num_classes}")
        if n and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise DatasetFormatError("label index out of range")
        if not 0 <= self.num_cited_only <= n:
            raise DatasetFormatError(f"num_cited_only must be in [0, {n}], got {self.num_cited_only}")
        if self.num_cited_only:
            tail = slice(n - self.num_cited_only, n)
            if np.any(self.features[tail] != 0) or np.any(self.labels[tail] != 0):
                raise DatasetFormatError("cited-only nodes must have zero features and label 0")
        if self.num_edges:
            u, v = self.edges[:, 0], self.edges[:, 1]
            if np.any(u >= v):
                raise DatasetFormatError("edges must be stored as u < v without self-loops")
            if u.min() < 0 or v.max() >= n:
                raise DatasetFormatError("edge endpoint out of range")
            keys = u * n + v
            if np.any(np.diff(keys) <= 0):
                raise DatasetFormatError("edges must be sorted and unique")


@dataclass(frozen=True)
class CitationLinks:
    """Result of parsing a ``.cites`` stream, with the counts of what was dropped."""
    edges: np.ndarray
    raw_lines: int
    self_loops: int = 0
    unknown_ids: int = 0
    duplicates: int = 0
    malformed: int = 0


class SplitStrategy(str, Enum):
    PLANETOID = 'planetoid'
    RANDOM = 'random'


@dataclass(frozen=True)
class SplitSpec:
    """How to carve a graph into train/validation/test nodes."""
    strategy: SplitStrategy = SplitStrategy.PLANETOID
    per_class: int = 20
    num_val: int = 500
    num_test: int = 1000
    train_fraction: float = 0.6
    val_fraction: float = 0.2
    test_fraction: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, 'strategy', SplitStrategy(self.strategy))
        fractions = (self.train_fraction, self.val_fraction, self.test_fraction)
        if any(f < 0 for f in fractions) or sum(fractions) > 1.0 + 1e-9:
            raise SplitError(f"split fractions must be non-negative and sum to at most 1, got {fractions}")
        if self.per_class < 0 or self.num_val < 0 or self.num_test < 0:
            raise SplitError("split counts must be non-negative")


@dataclass(frozen=True)
class SplitMasks:
    """Disjoint sorted node-index arrays; ``train_idx`` are the labeled nodes."""
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray

    def __post_init__(self):
        for name in ('train_idx', 'val_idx', 'test_idx'):
            object.__setattr__(self, name, _frozen(np.sort(getattr(self, name)), dtype=np.int64))
        parts = [set(self.train_idx.tolist()), set(self.val_idx.tolist()), set(self.test_idx.tolist())]
        if parts[0] & parts[1] or parts[0] & parts[2] or parts[1] & parts[2]:
            raise SplitError("train, validation and test sets must be disjoint")

    def labeled_mask(self, num_nodes: int) -> np.ndarray:
        mask = np.zeros(num_nodes, dtype=bool)
        mask[self.train_idx] = True
        return mask

    def check_against(self, graph: CitationGraph) -> None:
        """Raise ``SplitError`` unless these masks are valid for ``graph``."""
        for idx in (self.train_idx, self.val_idx, self.test_idx):
            if idx.size and (idx.min() < 0 or idx.max() >= graph.num_nodes):
                raise SplitError("split index out of range for graph")
        if self.train_idx.size == 0:
            raise SplitError("training set is empty")
        first_cited_only = graph.num_content_nodes
        if any(idx.size and idx.max() >= first_cited_only for idx in (self.train_idx, self.val_idx, self.test_idx)):
            raise SplitError("cited-only nodes cannot belong to a split")
        missing = set(range(graph.num_classes)) - set(graph.labels[self.train_idx].tolist())
        if missing:
            raise SplitError(f"training set has no node of classes {sorted(missing)}")


@dataclass(frozen=True)
class EdgeBucket:
    """Edges of one labeled/unlabeled category with their weights."""
    u: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    v: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    w: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.float64))

    def __post_init__(self):
        object.__setattr__(self, 'u', _frozen(self.u, dtype=np.int64))
        object.__setattr__(self, 'v', _frozen(self.v, dtype=np.int64))
        object.__setattr__(self, 'w', _frozen(self.w, dtype=np.float64))
        if not (self.u.shape == self.v.shape == self.w.shape):
            raise ValueError("edge bucket arrays must have equal length")

    def __len__(self) -> int:
        return int(self.u.shape[0])

    def __iter__(self) -> Iterator[Tuple[int, int, float]]:
        for u, v, w in zip(self.u, self.v, self.w):
            yield int(u), int(v), float(w)


@dataclass(frozen=True)
class EdgePartition:
    """Graph edges bucketed by how many endpoints are labeled."""
    ll: EdgeBucket
    lu: EdgeBucket
    uu: EdgeBucket

    def buckets(self) -> Tuple[Tuple[str, EdgeBucket], ...]:
        return (('ll', self.ll), ('lu', self.lu), ('uu', self.uu))

    def __len__(self) -> int:
        return len(self.ll) + len(self.lu) + len(self.uu)


@dataclass(frozen=True)
class DatasetStats:
    """One row of the dataset statistics table."""
    name: str
    nodes: int
    edges_raw: int
    edges_undirected: int
    features: int
    classes: int
    feature_type: str = 'binary'
