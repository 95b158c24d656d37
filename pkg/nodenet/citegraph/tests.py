import io
import itertools

import numpy as np
import pytest

from citegraph.loaders import (
    cited_only_ids,
    convert_pubmed,
    load_dataset,
    parse_cites,
    parse_content,
    resolve_dataset_files,
    serialize_cites,
    serialize_content,
)
from citegraph.services import (
    dataset_stats,
    make_split,
    partition_edges,
    reference_mismatches,
    stats_frame,
    without_edges,
)
from citegraph.structures import CitationGraph, DatasetStats, SplitMasks, SplitSpec
from core.exceptions import DatasetFormatError, SplitError


def make_graph(labels, edges=(), num_features=3, seed=0):
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    return CitationGraph(
        node_ids=tuple(f"n{i}" for i in range(len(labels))),
        features=(rng.random((len(labels), num_features)) < 0.5).astype(float),
        labels=labels,
        edges=np.array(sorted(edges), dtype=np.int64).reshape(-1, 2),
        num_classes=int(labels.max()) + 1,
        label_names=tuple(str(c) for c in range(int(labels.max()) + 1)),
        name='synthetic',
    )


def random_graph(num_nodes, num_classes, edge_probability, seed):
    rng = np.random.default_rng(seed)
    upper = np.triu(rng.random((num_nodes, num_nodes)) < edge_probability, k=1)
    return make_graph(np.arange(num_nodes) % num_classes, [tuple(e) for e in np.argwhere(upper)], seed=seed)


class TestParseContent:
    def test_two_rows(self):
        parsed = parse_content(io.StringIO("a 1 0 1 A\nb 0 0 1 B\n"))
        assert parsed.node_ids == ['a', 'b']
        assert parsed.features.shape == (2, 3)
        assert parsed.raw_labels == ['A', 'B']

    def test_tabs_and_blank_lines(self):
        parsed = parse_content(io.StringIO("a\t1\t0\tA\n\nb\t0\t1\tB\n"))
        assert parsed.features.tolist() == [[1.0, 0.0], [0.0, 1.0]]

    def test_short_row_names_line(self):
        with pytest.raises(DatasetFormatError) as excinfo:
            parse_content(io.StringIO("a 1 0 1 A\nb 0 1 B\n"), path='x.content')
        assert excinfo.value.line_number == 2
        assert 'x.content:2' in str(excinfo.value)

    def test_non_numeric_feature(self):
        with pytest.raises(DatasetFormatError):
            parse_content(io.StringIO("a 1 z 1 A\n"))

    def test_duplicate_id(self):
        with pytest.raises(DatasetFormatError):
            parse_content(io.StringIO("a 1 A\na 0 B\n"))

    def test_empty(self):
        with pytest.raises(DatasetFormatError):
            parse_content(io.StringIO("\n"))


class TestParseCites:
    ids = {'A': 0, 'B': 1, 'C': 2}

    def test_both_directions_collapse(self):
        links = parse_cites(io.StringIO("A B\nB A\n"), self.ids)
        assert links.edges.tolist() == [[0, 1]]
        assert links.raw_lines == 2
        assert links.duplicates == 1

    def test_self_loop_dropped(self):
        links = parse_cites(io.StringIO("A A\n"), self.ids)
        assert links.edges.shape == (0, 2)
        assert links.self_loops == 1

    def test_unknown_and_malformed_counted(self, caplog):
        links = parse_cites(io.StringIO("A Z\nA B C\nC B\n"), self.ids)
        assert links.edges.tolist() == [[1, 2]]
        assert (links.unknown_ids, links.malformed, links.raw_lines) == (1, 1, 3)
        assert 'dropped 1 unknown-id' in caplog.text


class TestLoadDataset:
    def test_tiny_dataset(self, tiny_dataset):
        graph = load_dataset(*resolve_dataset_files(tiny_dataset, 'tiny'), name='tiny')
        assert graph.num_nodes == 30
        assert graph.num_features == 12
        assert graph.label_names == ('Alpha', 'Beta', 'Gamma')
        assert graph.raw_edge_count == 31
        assert graph.num_edges == 28
        assert np.all(graph.edges[:, 0] < graph.edges[:, 1])

    def test_cited_only_ids_become_zero_feature_nodes(self, tiny_dataset):
        graph = load_dataset(*resolve_dataset_files(tiny_dataset, 'tiny'), name='tiny', include_cited_only=True)
        assert (graph.num_nodes, graph.num_content_nodes, graph.num_cited_only) == (31, 30, 1)
        assert graph.node_ids[-1] == 'missing'
        assert not graph.features[30].any()
        assert graph.labels[30] == 0
        assert (2, 30) in graph.edge_set()
        assert graph.num_edges == 29
        assert graph.raw_edge_count == 31

    def test_cited_only_ids_skip_malformed_lines(self):
        ids = {'A': 0, 'B': 1}
        assert cited_only_ids(io.StringIO("A Z\nB Y X\nQ A\nA B\n"), ids) == ['Q', 'Z']

    def test_cited_only_rows_must_be_empty(self):
        with pytest.raises(DatasetFormatError):
            CitationGraph(
                node_ids=('a', 'b', 'c'), features=np.ones((3, 2)), labels=np.array([0, 1, 0]),
                edges=np.empty((0, 2)), num_classes=2, num_cited_only=1,
            )

    def test_arrays_are_read_only(self, tiny_dataset):
        graph = load_dataset(*resolve_dataset_files(tiny_dataset, 'tiny'))
        with pytest.raises(ValueError):
            graph.features[0, 0] = 5

    def test_missing_files(self, tmp_path):
        with pytest.raises(DatasetFormatError):
            resolve_dataset_files(tmp_path, 'cora')

    def test_serialize_then_load_is_identical(self, tiny_dataset, tmp_path):
        graph = load_dataset(*resolve_dataset_files(tiny_dataset, 'tiny'), name='tiny')
        content, cites = tmp_path / 'copy.content', tmp_path / 'copy.cites'
        with content.open('w') as handle:
            serialize_content(graph, handle)
        with cites.open('w') as handle:
            serialize_cites(graph, handle)
        again = load_dataset(content, cites, name='tiny')
        assert np.array_equal(again.features, graph.features)
        assert np.array_equal(again.labels, graph.labels)
        assert np.array_equal(again.edges, graph.edges)
        assert again.node_ids == graph.node_ids

    def test_serialize_then_load_keeps_cited_only_nodes(self, tiny_dataset, tmp_path):
        graph = load_dataset(*resolve_dataset_files(tiny_dataset, 'tiny'), include_cited_only=True)
        content, cites = tmp_path / 'copy.content', tmp_path / 'copy.cites'
        with content.open('w') as handle:
            serialize_content(graph, handle)
        with cites.open('w') as handle:
            serialize_cites(graph, handle)
        assert len(content.read_text().splitlines()) == 30
        again = load_dataset(content, cites, include_cited_only=True)
        assert again.node_ids == graph.node_ids
        assert np.array_equal(again.edges, graph.edges)
        assert again.num_cited_only == 1


class TestSplits:
    def test_random_six_two_two(self):
        graph = make_graph(np.arange(10) % 2)
        masks = make_split(graph, SplitSpec(strategy='random'), seed=11)
        assert (masks.train_idx.size, masks.val_idx.size, masks.test_idx.size) == (6, 2, 2)
        assert set(graph.labels[masks.train_idx]) == {0, 1}

    @pytest.mark.parametrize('strategy', ['random', 'planetoid'])
    def test_same_seed_same_masks(self, strategy):
        graph = make_graph(np.arange(60) % 3)
        spec = SplitSpec(strategy=strategy, per_class=5, num_val=10, num_test=20)
        first, second = make_split(graph, spec, 4), make_split(graph, spec, 4)
        for name in ('train_idx', 'val_idx', 'test_idx'):
            assert np.array_equal(getattr(first, name), getattr(second, name))

    def test_planetoid_counts(self):
        graph = make_graph(np.arange(2708) % 7)
        masks = make_split(graph, SplitSpec(), seed=0)
        assert masks.train_idx.size == 140
        assert np.bincount(graph.labels[masks.train_idx]).tolist() == [20] * 7
        assert (masks.val_idx.size, masks.test_idx.size) == (500, 1000)

    def test_masks_disjoint(self):
        graph = make_graph(np.arange(40) % 4)
        masks = make_split(graph, SplitSpec(strategy='random'), seed=2)
        union = np.concatenate([masks.train_idx, masks.val_idx, masks.test_idx])
        assert len(set(union.tolist())) == union.size

    def test_single_member_class(self):
        graph = make_graph([0] * 9 + [1])
        masks = make_split(graph, SplitSpec(strategy='random'), seed=0)
        assert 9 in masks.train_idx
        assert (masks.train_idx.size, masks.val_idx.size, masks.test_idx.size) == (6, 2, 2)

    def test_remainder_smaller_than_class_count(self):
        graph = make_graph(np.arange(10) % 5)
        masks = make_split(graph, SplitSpec(strategy='random'), seed=0)
        assert set(graph.labels[masks.train_idx]) == set(range(5))
        assert (masks.train_idx.size, masks.val_idx.size, masks.test_idx.size) == (6, 2, 2)

    @pytest.mark.parametrize('seed', range(10))
    def test_stratified_when_every_class_is_large(self, seed):
        graph = make_graph(np.arange(100) % 4)
        masks = make_split(graph, SplitSpec(strategy='random'), seed=seed)
        assert np.bincount(graph.labels[masks.train_idx]).tolist() == [15] * 4

    @pytest.mark.parametrize('strategy', ['random', 'planetoid'])
    def test_cited_only_nodes_stay_out(self, tiny_dataset, strategy):
        graph = load_dataset(*resolve_dataset_files(tiny_dataset, 'tiny'), include_cited_only=True)
        spec = SplitSpec(strategy=strategy, per_class=3, num_val=5, num_test=100)
        masks = make_split(graph, spec, seed=1)
        used = np.concatenate([masks.train_idx, masks.val_idx, masks.test_idx])
        assert used.max() < graph.num_content_nodes == 30

    def test_masks_naming_cited_only_node_rejected(self, tiny_dataset):
        graph = load_dataset(*resolve_dataset_files(tiny_dataset, 'tiny'), include_cited_only=True)
        masks = SplitMasks(train_idx=np.array([0, 1, 2]), val_idx=np.array([30]), test_idx=np.array([3]))
        with pytest.raises(SplitError):
            masks.check_against(graph)

    def test_too_few_training_nodes(self):
        graph = make_graph(np.arange(10) % 5)
        with pytest.raises(SplitError):
            make_split(graph, SplitSpec(strategy='random', train_fraction=0.3, val_fraction=0.3, test_fraction=0.4), 0)

    def test_overlapping_masks_rejected(self):
        with pytest.raises(SplitError):
            SplitMasks(train_idx=np.array([0, 1]), val_idx=np.array([1]), test_idx=np.array([2]))

    def test_bad_fractions_rejected(self):
        with pytest.raises(SplitError):
            SplitSpec(train_fraction=0.8, val_fraction=0.2, test_fraction=0.2)


class TestPartition:
    def test_three_node_example(self):
        graph = make_graph([0, 1, 0], edges=[(0, 1), (1, 2)])
        masks = SplitMasks(train_idx=np.array([0, 1]), val_idx=np.array([], dtype=int), test_idx=np.array([2]))
        partition = partition_edges(graph, masks)
        assert [(u, v) for u, v, _ in partition.ll] == [(0, 1)]
        assert [(u, v) for u, v, _ in partition.lu] == [(1, 2)]
        assert len(partition.uu) == 0

    def test_all_labeled(self):
        graph = random_graph(12, 2, 0.4, seed=1)
        masks = SplitMasks(train_idx=np.arange(12), val_idx=np.array([], dtype=int), test_idx=np.array([], dtype=int))
        partition = partition_edges(graph, masks)
        assert len(partition.lu) == len(partition.uu) == 0
        assert len(partition.ll) == graph.num_edges

    @pytest.mark.parametrize('seed', range(100))
    def test_matches_per_edge_membership(self, seed):
        graph = random_graph(30, 3, 0.15, seed)
        masks = make_split(graph, SplitSpec(strategy='random'), seed)
        labeled = set(masks.train_idx.tolist())
        partition = partition_edges(graph, masks, default_weight=2.0)
        expected = {0: set(), 1: set(), 2: set()}
        for u, v in graph.edges.tolist():
            expected[(u in labeled) + (v in labeled)].add((u, v))
        assert {(u, v) for u, v, _ in partition.uu} == expected[0]
        assert {(u, v) for u, v, _ in partition.lu} == expected[1]
        assert {(u, v) for u, v, _ in partition.ll} == expected[2]
        assert all(w == 2.0 for _, _, w in itertools.chain(partition.ll, partition.lu, partition.uu))
        assert len(partition) == graph.num_edges

    def test_validation_and_test_are_interchangeable(self):
        graph = random_graph(20, 2, 0.3, seed=3)
        train = np.arange(8)
        first = partition_edges(graph, SplitMasks(train, np.arange(8, 14), np.arange(14, 20)))
        swapped = partition_edges(graph, SplitMasks(train, np.arange(14, 20), np.arange(8, 14)))
        for (_, a), (_, b) in zip(first.buckets(), swapped.buckets()):
            assert np.array_equal(a.u, b.u) and np.array_equal(a.v, b.v)


class TestStats:
    def test_edges_counted_raw_and_undirected(self, tiny_dataset):
        graph = load_dataset(*resolve_dataset_files(tiny_dataset, 'tiny'), name='tiny')
        stats = dataset_stats(graph)
        assert (stats.nodes, stats.edges_raw, stats.edges_undirected) == (30, 31, 28)
        assert reference_mismatches(stats) == []

    def test_cited_only_nodes_counted(self, tiny_dataset):
        graph = load_dataset(*resolve_dataset_files(tiny_dataset, 'tiny'), include_cited_only=True)
        stats = dataset_stats(graph)
        assert (stats.nodes, stats.edges_raw, stats.edges_undirected) == (31, 31, 29)

    def test_published_citeseer_row_matches(self):
        stats = DatasetStats(name='citeseer', nodes=3327, edges_raw=4732, edges_undirected=4552,
                             features=3703, classes=6)
        assert reference_mismatches(stats) == []

    def test_published_mismatch_reported(self):
        stats = DatasetStats(name='citeseer', nodes=3312, edges_raw=4732, edges_undirected=4552,
                             features=3703, classes=6)
        assert reference_mismatches(stats) == ['nodes: expected 3327, got 3312']

    def test_stats_frame_columns(self):
        stats = DatasetStats(name='cora', nodes=2708, edges_raw=5429, edges_undirected=5278,
                             features=1433, classes=7)
        frame = stats_frame([stats])
        assert frame.columns[0] == 'dataset'
        assert frame.loc[0, 'nodes'] == 2708

    def test_without_edges(self):
        graph = random_graph(10, 2, 0.5, seed=0)
        bare = without_edges(graph)
        assert bare.num_edges == 0
        assert np.array_equal(bare.features, graph.features)


def test_convert_pubmed():
    nodes = io.StringIO(
        "NODE\tpaper\n"
        "cat=1,2,3:label\tnumeric:w-rat:0.0\tnumeric:w-insulin:0.0\tnumeric:w-use:0.0\n"
        "101\tlabel=1\tw-rat=0.09\tw-use=0.02\tsummary=w-rat,w-use\n"
        "102\tlabel=3\tw-insulin=0.5\tsummary=w-insulin\n"
    )
    cites = io.StringIO(
        "DIRECTED\tcites\n"
        "NO_FEATURES\n"
        "33824\tpaper:102\t|\tpaper:101\n"
    )
    content_text, cites_text = convert_pubmed(nodes, cites)
    parsed = parse_content(io.StringIO(content_text))
    assert parsed.node_ids == ['101', '102']
    assert parsed.features.tolist() == [[0.09, 0.0, 0.02], [0.0, 0.5, 0.0]]
    assert parsed.raw_labels == ['1', '3']
    assert cites_text == "101\t102\n"


def test_convert_pubmed_rejects_undeclared_word():
    nodes = io.StringIO("NODE\tpaper\nx\tnumeric:w-a:0.0\n1\tlabel=1\tw-b=0.3\n")
    with pytest.raises(DatasetFormatError):
        convert_pubmed(nodes, io.StringIO(""))
