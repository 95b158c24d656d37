"""
Network configuration, parameters and forward traces.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from core.exceptions import ConfigError

ACTIVATIONS = ('relu', 'tanh', 'identity')
PRECISIONS = ('float64', 'float32')


class Mode(str, Enum):
    TRAIN = 'train'
    INFER = 'infer'


@dataclass(frozen=True)
class NetworkConfig:
    """
    Shape and regularization settings of the feedforward classifier.

    ``layer_widths`` is ``[f, h1, ..., hm, K]``. ``batchnorm`` may be a single
    flag or one flag per hidden layer. ``latent_layer`` indexes the hidden
    layer whose post-activation output is the latent representation; it
    defaults to the last hidden layer. A network without hidden layers uses
    its logits as the latent representation.
    """
    layer_widths: Tuple[int, ...]
    dropout_rate: float = 0.5
    batchnorm: Union[bool, Tuple[bool, ...]] = True
    bn_epsilon: float = 1e-5
    bn_momentum: float = 0.9
    activation: str = 'relu'
    latent_layer: Optional[int] = None
    precision: str = 'float64'

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        if len(widths) < 2 or any(w <= 0 for w in widths):
            raise ConfigError(f"layer_widths needs at least two positive entries, got {self.layer_widths}")
        object.__setattr__(self, 'layer_widths', widths)
        hidden = len(widths) - 2

        if isinstance(self.batchnorm, (bool, np.bool_)):
            flags = (bool(self.batchnorm),) * hidden
        else:
            flags = tuple(bool(b) for b in self.batchnorm)
            if len(flags) != hidden:
                raise ConfigError(f"expected {hidden} batchnorm flags, got {len(flags)}")
        object.__setattr__(self, 'batchnorm', flags)

        latent = self.latent_layer
        if hidden == 0:
            latent = None
        elif latent is None:
            latent = hidden - 1
        elif not 0 <= latent < hidden:
            raise ConfigError(f"latent_layer must be in [0, {hidden}), got {latent}")
        object.__setattr__(self, 'latent_layer', latent)

        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if not self.bn_epsilon > 0:
            raise ConfigError(f"bn_epsilon must be positive, got {self.bn_epsilon}")
        if not 0.0 < self.bn_momentum < 1.0:
            raise ConfigError(f"bn_momentum must be in (0, 1), got {self.bn_momentum}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"activation must be one of {ACTIVATIONS}, got '{self.activation}'")
        if self.precision not in PRECISIONS:
            raise ConfigError(f"precision must be one of {PRECISIONS}, got '{self.precision}'")

    @classmethod
    def for_dataset(cls, num_features: int, num_classes: int, hidden_widths: Sequence[int] = (64, 64), **kwargs):
        return cls(layer_widths=(num_features, *hidden_widths, num_classes), **kwargs)

    @property
    def num_hidden(self) -> int:
        return len(self.layer_widths) - 2

    @property
    def input_width(self) -> int:
        return self.layer_widths[0]

    @property
    def num_classes(self) -> int:
        return self.layer_widths[-1]

    @property
    def latent_width(self) -> int:
        if self.latent_layer is None:
            return self.num_classes
        return self.layer_widths[self.latent_layer + 1]

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(self.precision)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'layer_widths': list(self.layer_widths),
            'dropout_rate': self.dropout_rate,
            'batchnorm': list(self.batchnorm),
            'bn_epsilon': self.bn_epsilon,
            'bn_momentum': self.bn_momentum,
            'activation': self.activation,
            'latent_layer': self.latent_layer,
            'precision': self.precision,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'NetworkConfig':
        data = dict(data)
        data['layer_widths'] = tuple(data['layer_widths'])
        data['batchnorm'] = tuple(data['batchnorm'])
        return cls(**data)


@dataclass
class NetworkParameters:
    """
    Named parameter tensors.

    Dense layer ``l`` owns ``W{l}`` and ``b{l}``; a hidden layer with batch
    normalization also owns ``gamma{l}``, ``beta{l}``, ``running_mean{l}`` and
    ``running_var{l}``. The output layer has index ``num_hidden``.
    """
    tensors: Dict[str, np.ndarray] = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def trainable_names(self) -> List[str]:
        return [name for name in self.tensors if not name.startswith('running_')]

    def copy(self) -> 'NetworkParameters':
        return NetworkParameters({name: value.copy() for name, value in self.tensors.items()})

    def replaced(self, updates: Dict[str, np.ndarray]) -> 'NetworkParameters':
        """New parameters with ``updates`` swapped in; the rest are shared."""
        tensors = dict(self.tensors)
        tensors.update(updates)
        return NetworkParameters(tensors)


def is_decayed(name: str) -> bool:
    """Weight decay applies to dense weight matrices only."""
    return name.startswith('W')


@dataclass
class LayerCache:
    """Intermediates of one hidden layer needed by the backward pass."""
    inputs: np.ndarray
    pre_norm: np.ndarray
    normalized: Optional[np.ndarray]
    inv_std: Optional[np.ndarray]
    pre_activation: np.ndarray
    activation: np.ndarray
    dropout_mask: Optional[np.ndarray]


@dataclass
class ForwardTrace:
    """
    Outputs of one forward pass plus what backpropagation needs.

    ``running_updates`` holds the batch-norm running statistics a train-mode
    pass would commit; the caller decides whether to apply them.
    """
    logits: np.ndarray
    probabilities: np.ndarray
    latent: np.ndarray
    mode: Mode
    layers: List[LayerCache] = field(default_factory=list)
    output_inputs: Optional[np.ndarray] = None
    running_updates: Dict[str, np.ndarray] = field(default_factory=dict)
