from dataclasses import dataclass
from enum import Enum

from core.exceptions import ConfigError


class Metric(str, Enum):
    L1 = 'l1'
    L2 = 'l2'
    COSINE_PENALTY = 'cosine'


class Reduction(str, Enum):
    MEAN = 'mean'
    SUM = 'sum'


@dataclass(frozen=True)
class GraphLossConfig:
    """
    Weights and distance of the graph regularization terms.

    ``alpha_ll``, ``alpha_lu`` and ``alpha_uu`` scale the labeled-labeled,
    labeled-unlabeled and unlabeled-unlabeled edge terms. With
    ``raw_cosine`` the cosine metric contributes the plain similarity
    instead of ``1 - similarity``. ``reduction='mean'`` divides each bucket
    sum by its edge count before scaling.
    """
    alpha_ll: float = 0.0
    alpha_lu: float = 0.0
    alpha_uu: float = 0.0
    metric: Metric = Metric.COSINE_PENALTY
    cosine_epsilon: float = 1e-12
    raw_cosine: bool = False
    reduction: Reduction = Reduction.MEAN

    def __post_init__(self):
        object.__setattr__(self, 'metric', Metric(self.metric))
        object.__setattr__(self, 'reduction', Reduction(self.reduction))
        for name in ('alpha_ll', 'alpha_lu', 'alpha_uu'):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"{name} must be non-negative, got {getattr(self, name)}")
        if not self.cosine_epsilon > 0:
            raise ConfigError(f"cosine_epsilon must be positive, got {self.cosine_epsilon}")

    @property
    def alphas(self):
        return {'ll': self.alpha_ll, 'lu': self.alpha_lu, 'uu': self.alpha_uu}

    @property
    def is_disabled(self) -> bool:
        return self.alpha_ll == 0 and self.alpha_lu == 0 and self.alpha_uu == 0

    @property
    def label(self) -> str:
        """Summary label: ``baseline`` when every alpha is zero, else the metric name."""
        return 'baseline' if self.is_disabled else self.metric.value
