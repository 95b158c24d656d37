"""
Modified TF-IDF featurization.

Binary word-presence vectors carry no term counts, so the term-frequency factor
is replaced by ``1 / n_i`` where ``n_i`` is the number of words present in
document ``i``: ``mtfidf[i, j] = idf[j] / n_i`` for present words, else 0.
"""
import dataclasses
import logging
import math

import numpy as np

from citegraph.structures import CitationGraph
from core.exceptions import FeaturizeError, ShapeError
from .structures import FeatureMode, IdfModel

logger = logging.getLogger(__name__)


def is_binary(matrix: np.ndarray) -> bool:
    """True when every entry is exactly 0 or 1."""
    return bool(np.all((matrix == 0) | (matrix == 1)))


def fit_idf(binary_features: np.ndarray, log_base: float = math.e) -> IdfModel:
    """
    Fit smooth IDF weights.

    Args:
        binary_features: n x f matrix; entries > 0 count as present
        log_base: Logarithm base, natural by default

    Returns:
        IdfModel over the f terms

    Raises:
        FeaturizeError: If the matrix is empty
    """
    matrix = np.asarray(binary_features)
    if matrix.ndim != 2 or matrix.shape[0] == 0 or matrix.shape[1] == 0:
        raise FeaturizeError(f"cannot fit IDF on an empty matrix of shape {matrix.shape}")
    if not log_base > 0 or log_base == 1:
        raise FeaturizeError(f"invalid logarithm base {log_base}")

    num_documents = matrix.shape[0]
    doc_frequency = (matrix > 0).sum(axis=0).astype(np.int64)
    ratio = num_documents / (1.0 + doc_frequency)
    if log_base == math.e:
        idf = np.log(ratio) + 1.0
    else:
        idf = np.log(ratio) / math.log(log_base) + 1.0
    return IdfModel(idf=idf, num_documents=num_documents, doc_frequency=doc_frequency, log_base=log_base)


def transform_mtfidf(binary_features: np.ndarray, idf_model: IdfModel) -> np.ndarray:
    """
    Apply the modified TF-IDF weighting row by row.

    All-zero rows stay all-zero.

    Raises:
        ShapeError: If the feature width differs from the fitted model
    """
    matrix = np.asarray(binary_features)
    if matrix.ndim != 2 or matrix.shape[1] != idf_model.num_terms:
        raise ShapeError(f"feature width {matrix.shape[-1]} does not match IDF model width {idf_model.num_terms}")
    present = matrix > 0
    term_counts = present.sum(axis=1, keepdims=True).astype(np.float64)
    weighted = np.where(present, idf_model.idf[np.newaxis, :], 0.0)
    return np.divide(weighted, term_counts, out=np.zeros_like(weighted), where=term_counts > 0)


def featurize_dataset(graph: CitationGraph, mode, log_base: float = math.e) -> CitationGraph:
    """
    Return ``graph`` with features transformed by ``mode``.

    IDF is fitted on every node with a ``.content`` row (transductive); cited-only
    placeholder rows are transformed but not counted. ``identity`` hands the
    features through untouched, which is the path for datasets that already
    ship TF-IDF vectors.

    Raises:
        FeaturizeError: If mtfidf is requested on non-binary features
    """
    mode = FeatureMode(mode)
    if mode is FeatureMode.IDENTITY:
        return graph
    if not is_binary(graph.features):
        raise FeaturizeError(f"mtfidf requires binary features; {graph.name or 'graph'} is not binary")
    model = fit_idf(graph.features[:graph.num_content_nodes], log_base=log_base)
    features = transform_mtfidf(graph.features, model)
    logger.info(f"Applied mtfidf to {graph.num_nodes} x {graph.num_features} features of {graph.name or 'graph'}")
    return dataclasses.replace(graph, features=features, feature_type='mtfidf')
