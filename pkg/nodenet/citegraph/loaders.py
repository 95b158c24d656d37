"""
Readers and writers for the ``.content`` / ``.cites`` citation dataset layout.

``.content`` lines are ``<id> <f feature values> <label>``; ``.cites`` lines are
``<cited_id> <citing_id>``. Both are whitespace or tab separated.
"""
import logging
from pathlib import Path
from typing import Dict, Iterable, List, NamedTuple, Optional, TextIO, Tuple

import numpy as np

from core.exceptions import DatasetFormatError
from .structures import CitationGraph, CitationLinks

logger = logging.getLogger(__name__)


class ParsedContent(NamedTuple):
    node_ids: List[str]
    features: np.ndarray
    raw_labels: List[str]


def parse_content(stream: Iterable[str], path: Optional[str] = None) -> ParsedContent:
    """
    Parse a ``.content`` stream.

    Args:
        stream: Text lines of the file
        path: File name used in error messages

    Returns:
        ParsedContent with rows in file order and label strings verbatim

    Raises:
        DatasetFormatError: On a column-count change, a non-numeric feature,
            a repeated node id or an empty file
    """
    node_ids: List[str] = []
    rows: List[np.ndarray] = []
    raw_labels: List[str] = []
    seen: Dict[str, int] = {}
    width = None

    for line_number, line in enumerate(stream, start=1):
        tokens = line.split()
        if not tokens:
            continue
        if width is None:
            width = len(tokens)
            if width < 3:
                raise DatasetFormatError(
                    f"expected '<id> <features...> <label>', got {width} columns",
                    line_number=line_number, path=path,
                )
        elif len(tokens) != width:
            raise DatasetFormatError(
                f"expected {width} columns ({width - 2} features), got {len(tokens)}",
                line_number=line_number, path=path,
            )
        node_id = tokens[0]
        if node_id in seen:
            raise DatasetFormatError(
                f"node id '{node_id}' already defined on line {seen[node_id]}",
                line_number=line_number, path=path,
            )
        try:
            values = np.array(tokens[1:-1], dtype=np.float64)
        except ValueError as exc:
            raise DatasetFormatError(f"non-numeric feature value ({exc})", line_number=line_number, path=path) from exc
        seen[node_id] = line_number
        node_ids.append(node_id)
        rows.append(values)
        raw_labels.append(tokens[-1])

    if not rows:
        raise DatasetFormatError("no node rows found", path=path)
    return ParsedContent(node_ids, np.vstack(rows), raw_labels)


def parse_cites(stream: Iterable[str], id_index: Dict[str, int], path: Optional[str] = None) -> CitationLinks:
    """
    Parse a ``.cites`` stream into a deduplicated undirected edge array.

    Self-loops, lines naming ids missing from ``id_index`` and malformed lines
    are dropped and counted rather than treated as fatal.
    """
    raw_lines = self_loops = unknown = duplicates = malformed = 0
    pairs = set()

    for line_number, line in enumerate(stream, start=1):
        tokens = line.split()
        if not tokens:
            continue
        raw_lines += 1
        if len(tokens) != 2:
            malformed += 1
            logger.debug(f"{path or 'cites'}:{line_number}: skipping malformed line")
            continue
        cited, citing = tokens
        if cited not in id_index or citing not in id_index:
            unknown += 1
            continue
        u, v = id_index[cited], id_index[citing]
        if u == v:
            self_loops += 1
            continue
        key = (u, v) if u < v else (v, u)
        if key in pairs:
            duplicates += 1
            continue
        pairs.add(key)

    if unknown or self_loops or malformed:
        logger.warning(
            f"{path or 'cites'}: dropped {unknown} unknown-id, {self_loops} self-loop "
            f"and {malformed} malformed citation lines"
        )
    edges = np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)
    return CitationLinks(
        edges=edges,
        raw_lines=raw_lines,
        self_loops=self_loops,
        unknown_ids=unknown,
        duplicates=duplicates,
        malformed=malformed,
    )


def cited_only_ids(stream: Iterable[str], id_index: Dict[str, int]) -> List[str]:
    """Ids named by well-formed citation lines but absent from ``id_index``, sorted."""
    missing = set()
    for line in stream:
        tokens = line.split()
        if len(tokens) == 2:
            missing.update(token for token in tokens if token not in id_index)
    return sorted(missing)


def resolve_dataset_files(directory, name: str) -> Tuple[Path, Path]:
    """Locate ``<name>.content`` and ``<name>.cites`` inside ``directory``."""
    directory = Path(directory)
    content_path = directory / f"{name}.content"
    cites_path = directory / f"{name}.cites"
    for candidate in (content_path, cites_path):
        if not candidate.is_file():
            raise DatasetFormatError(f"dataset file not found: {candidate}")
    return content_path, cites_path


def load_dataset(
    content_path,
    cites_path,
    name: str = '',
    feature_type: str = 'binary',
    include_cited_only: bool = False,
) -> CitationGraph:
    """
    Load a citation graph from its two files.

    Label strings are mapped to class indices in lexicographic order so the
    mapping does not depend on row order.

    With ``include_cited_only`` every id that appears in ``.cites`` but has no
    ``.content`` row is appended after the content rows as a zero-feature node
    with placeholder label 0, and its citation lines are kept.
    """
    content_path, cites_path = Path(content_path), Path(cites_path)
    with content_path.open('r', encoding='utf-8') as handle:
        parsed = parse_content(handle, path=str(content_path))

    label_names = tuple(sorted(set(parsed.raw_labels)))
    label_index = {label: i for i, label in enumerate(label_names)}
    labels = np.array([label_index[label] for label in parsed.raw_labels], dtype=np.int64)
    node_ids = list(parsed.node_ids)
    features = parsed.features
    id_index = {node_id: i for i, node_id in enumerate(node_ids)}

    extra: List[str] = []
    if include_cited_only:
        with cites_path.open('r', encoding='utf-8') as handle:
            extra = cited_only_ids(handle, id_index)
        for node_id in extra:
            id_index[node_id] = len(node_ids)
            node_ids.append(node_id)
        features = np.vstack([features, np.zeros((len(extra), features.shape[1]))])
        labels = np.concatenate([labels, np.zeros(len(extra), dtype=np.int64)])
        if extra:
            logger.info(f"Added {len(extra)} cited-only nodes with zero features")

    with cites_path.open('r', encoding='utf-8') as handle:
        links = parse_cites(handle, id_index, path=str(cites_path))

    graph = CitationGraph(
        node_ids=tuple(node_ids),
        features=features,
        labels=labels,
        edges=links.edges,
        num_classes=len(label_names),
        label_names=label_names,
        name=name or content_path.stem,
        raw_edge_count=links.raw_lines,
        feature_type=feature_type,
        num_cited_only=len(extra),
    )
    logger.info(
        f"Loaded {graph.name}: {graph.num_nodes} nodes, {graph.num_features} features, "
        f"{graph.num_classes} classes, {links.raw_lines} citation lines, {graph.num_edges} undirected edges"
    )
    return graph


def _format_value(value: float) -> str:
    value = float(value)
    if value.is_integer():
        return str(int(value))
    return repr(value)


def serialize_content(graph: CitationGraph, stream: TextIO) -> None:
    """
    Write ``graph`` in ``.content`` layout; parsing the output reproduces it exactly.

    Cited-only nodes have no row; reloading with ``include_cited_only``
    restores them from the citation lines.
    """
    if len(graph.label_names) != graph.num_classes:
        raise DatasetFormatError("graph has no label names to serialize")
    content = graph.num_content_nodes
    for node_id, row, label in zip(graph.node_ids[:content], graph.features[:content], graph.labels[:content]):
        values = '\t'.join(_format_value(x) for x in row)
        stream.write(f"{node_id}\t{values}\t{graph.label_names[label]}\n")


def serialize_cites(graph: CitationGraph, stream: TextIO) -> None:
    """Write the undirected edge set as ``.cites`` lines, one per edge."""
    for u, v in graph.edges:
        stream.write(f"{graph.node_ids[u]}\t{graph.node_ids[v]}\n")


def convert_pubmed(node_stream: Iterable[str], cites_stream: Iterable[str]) -> Tuple[str, str]:
    """
    Convert the ``Pubmed-Diabetes`` tab distribution into ``.content`` / ``.cites`` text.

    The node file declares its word features on its second line
    (``numeric:<word>:0.0``); data lines carry ``label=<k>`` and sparse
    ``<word>=<tfidf>`` tokens. Absent words become 0 and the trailing
    ``summary=`` token is ignored. Citation lines ``<row> paper:<a> | paper:<b>``
    become ``<b> <a>``.

    Returns:
        tuple: (content_text, cites_text)
    """
    feature_names: List[str] = []
    feature_index: Dict[str, int] = {}
    content_lines: List[str] = []

    for line_number, line in enumerate(node_stream, start=1):
        tokens = line.rstrip('\n').split('\t')
        if not line.strip() or tokens[0] == 'NODE':
            continue
        if not feature_names and any(t.startswith('numeric:') for t in tokens):
            for token in tokens:
                if token.startswith('numeric:'):
                    feature_index[token.split(':')[1]] = len(feature_names)
                    feature_names.append(token.split(':')[1])
            continue
        if not feature_names:
            raise DatasetFormatError("feature declaration line missing", line_number=line_number)

        values = np.zeros(len(feature_names), dtype=np.float64)
        label = None
        for token in tokens[1:]:
            key, _, raw = token.partition('=')
            if key == 'label':
                label = raw
            elif key == 'summary' or not key:
                continue
            elif key in feature_index:
                try:
                    values[feature_index[key]] = float(raw)
                except ValueError as exc:
                    raise DatasetFormatError(f"bad value for '{key}'", line_number=line_number) from exc
            else:
                raise DatasetFormatError(f"undeclared feature '{key}'", line_number=line_number)
        if label is None:
            raise DatasetFormatError("node line without label", line_number=line_number)
        formatted = '\t'.join(_format_value(x) for x in values)
        content_lines.append(f"{tokens[0]}\t{formatted}\t{label}\n")

    cites_lines: List[str] = []
    for line_number, line in enumerate(cites_stream, start=1):
        tokens = line.split()
        if not tokens or tokens[0] in ('DIRECTED', 'NO_FEATURES'):
            continue
        papers = [t.split(':', 1)[1] for t in tokens if t.startswith('paper:')]
        if len(papers) != 2:
            raise DatasetFormatError("expected two 'paper:<id>' tokens", line_number=line_number)
        citing, cited = papers
        cites_lines.append(f"{cited}\t{citing}\n")

    logger.info(f"Converted {len(content_lines)} nodes, {len(feature_names)} features, {len(cites_lines)} citations")
    return ''.join(content_lines), ''.join(cites_lines)
