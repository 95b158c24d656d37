import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


class FeatureMode(str, Enum):
    IDENTITY = 'identity'
    MTFIDF = 'mtfidf'


@dataclass(frozen=True)
class IdfModel:
    """
    Smooth inverse document frequency weights fitted on a binary corpus.

    ``idf[j] = log(N / (1 + doc_frequency[j])) + 1`` in base ``log_base``.
    """
    idf: np.ndarray
    num_documents: int
    doc_frequency: np.ndarray
    log_base: float = math.e

    @property
    def num_terms(self) -> int:
        return int(self.idf.shape[0])
