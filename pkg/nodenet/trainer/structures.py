"""
Training configuration, optimizer state and the per-epoch metrics log.
"""
import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd

from citegraph.structures import CitationGraph, EdgePartition, SplitMasks
from core.exceptions import ConfigError
from core.files import atomic_path
from neuralnet.structures import NetworkParameters

METRICS_COLUMNS = [
    'epoch', 'total_loss', 'supervised_loss', 'graph_loss',
    'train_acc', 'val_acc', 'test_acc', 'seconds',
]


class BatchMode(str, Enum):
    FULL = 'full'
    EDGE_SAMPLED = 'edge_sampled'


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    epochs: int = 2000
    patience: int = 50
    seed: int = 0
    batch_mode: BatchMode = BatchMode.FULL
    batch_edges: int = 512
    weight_decay: float = 5e-4

    def __post_init__(self):
        object.__setattr__(self, 'batch_mode', BatchMode(self.batch_mode))
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError(f"betas must lie in [0, 1), got ({self.beta1}, {self.beta2})")
        if not self.adam_epsilon > 0:
            raise ConfigError(f"adam_epsilon must be positive, got {self.adam_epsilon}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be at least 1, got {self.epochs}")
        if self.patience < 0:
            raise ConfigError(f"patience must be non-negative, got {self.patience}")
        if self.batch_edges < 1:
            raise ConfigError(f"batch_edges must be positive, got {self.batch_edges}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be non-negative, got {self.weight_decay}")


@dataclass
class AdamState:
    """First and second moment estimates per trainable tensor, plus the step count."""
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def zeros_like(cls, params: NetworkParameters) -> 'AdamState':
        names = params.trainable_names()
        return cls(
            m={name: np.zeros_like(params[name]) for name in names},
            v={name: np.zeros_like(params[name]) for name in names},
        )

    def copy(self) -> 'AdamState':
        return AdamState(
            m={k: a.copy() for k, a in self.m.items()},
            v={k: a.copy() for k, a in self.v.items()},
            step=self.step,
        )

    def to_groups(self) -> Dict[str, Dict[str, np.ndarray]]:
        return {'adam_m': self.m, 'adam_v': self.v}

    @classmethod
    def from_groups(cls, groups: Dict[str, Dict[str, np.ndarray]], step: int) -> 'AdamState':
        return cls(m=dict(groups.get('adam_m', {})), v=dict(groups.get('adam_v', {})), step=step)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    total_loss: float
    supervised_loss: float
    graph_loss: float
    train_acc: float
    val_acc: float
    test_acc: float
    seconds: float


@dataclass
class MetricsLog:
    """One record per completed epoch, numbered from 1, and the selected epoch."""
    records: List[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0

    def append(self, record: EpochRecord) -> None:
        expected = len(self.records) + 1
        if record.epoch != expected:
            raise ValueError(f"expected epoch {expected}, got {record.epoch}")
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def best(self) -> Optional[EpochRecord]:
        return self.records[self.best_epoch - 1] if self.best_epoch else None

    def to_frame(self, record_seconds: bool = False) -> pd.DataFrame:
        frame = pd.DataFrame([dataclasses.asdict(r) for r in self.records], columns=METRICS_COLUMNS)
        if not record_seconds:
            frame['seconds'] = 0.0
        return frame

    def write_csv(self, path, record_seconds: bool = False) -> Path:
        """
        Export as CSV with the fixed column order.

        Wall-clock seconds are zeroed unless ``record_seconds`` is set, so equal
        runs produce identical bytes.
        """
        frame = self.to_frame(record_seconds)
        with atomic_path(path) as tmp:
            frame.to_csv(tmp, index=False)
        return Path(path)


class TrainResult(NamedTuple):
    params: NetworkParameters
    log: MetricsLog
    optimizer_state: AdamState


@dataclass(frozen=True)
class ToyInstance:
    """A tiny labeled graph used for finite-difference checks."""
    graph: CitationGraph
    masks: SplitMasks
    partition: EdgePartition
    seed: int = 0


@dataclass(frozen=True)
class GradientCheckReport:
    max_relative_error: float
    worst_parameter: str
    checked: int
    skipped: int

    def passed(self, tolerance: float) -> bool:
        return self.max_relative_error < tolerance


def default_tolerance(batchnorm: Tuple[bool, ...]) -> float:
    """Batch statistics couple samples, so checks with batch norm get a looser bound."""
    return 1e-4 if any(batchnorm) else 1e-5
