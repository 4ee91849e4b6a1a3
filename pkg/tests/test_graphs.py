import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from d4x.graphs import (Dataset, DatasetFormatError, GRAPH_TASK, Graph,
                        MOTIFS, NODE_TASK, ParameterError,
                        extract_computational_subgraph, gen_ba3motif,
                        gen_ba_graph, gen_tree_motif, gen_tree_motif_dataset,
                        load_dataset, save_dataset)


def _check_invariants(g: Graph):
    g.validate()
    assert np.array_equal(g.adj, g.adj.T)
    assert np.all(np.diag(g.adj) == 0)


def test_ba_m1_is_tree():
    g = gen_ba_graph(10, 1, seed=0)
    _check_invariants(g)
    assert g.num_edges() == 9


def test_ba_edge_count_formula():
    # initial clique on m+1 nodes plus m edges per later node
    g = gen_ba_graph(5, 2, seed=1)
    _check_invariants(g)
    assert g.num_edges() == 3 + 2 * (5 - 3)


def test_ba_deterministic():
    assert np.array_equal(gen_ba_graph(12, 2, 7).adj, gen_ba_graph(12, 2, 7).adj)


def test_ba_rejects_bad_params():
    with pytest.raises(ParameterError):
        gen_ba_graph(3, 3, seed=0)


def test_ba_connected():
    g = gen_ba_graph(30, 1, seed=5)
    sub = extract_computational_subgraph(g, 0, hops=g.n)
    assert sub.n == g.n


def test_tree_no_motifs():
    g = gen_tree_motif(4, "cycle6", 0, seed=0)
    assert g.n == 15
    assert g.num_edges() == 14
    assert np.all(g.y == 0)


def test_tree_one_cycle():
    g = gen_tree_motif(4, "cycle6", 1, seed=0)
    _check_invariants(g)
    assert g.n == 21
    assert g.num_edges() == 14 + 6 + 1
    assert g.y.sum() == 6


def test_motif_templates():
    for name, (size, edges) in MOTIFS.items():
        assert len({v for e in edges for v in e}) == size
    assert MOTIFS["house5"][0] == 5 and len(MOTIFS["house5"][1]) == 6
    assert MOTIFS["cycle6"][0] == 6 and len(MOTIFS["cycle6"][1]) == 6
    assert MOTIFS["grid3x3"][0] == 9 and len(MOTIFS["grid3x3"][1]) == 12


def test_ba3motif_balanced():
    ds = gen_ba3motif(30, seed=0)
    assert ds.task == GRAPH_TASK
    labels = [g.y for g in ds.graphs]
    assert all(labels.count(c) == 10 for c in range(3))
    for g in ds.graphs:
        _check_invariants(g)


def test_tree_dataset_splits_cover_nodes():
    ds = gen_tree_motif_dataset(4, "cycle6", 2, seed=0)
    assert ds.task == NODE_TASK
    g = ds.graphs[0]
    all_idx = sorted(ds.train_idx + ds.val_idx + ds.test_idx)
    assert all_idx == list(range(g.n))


@given(st.integers(0, 2 ** 31 - 1))
@settings(max_examples=20, deadline=None)
def test_generators_pure_in_seed(seed):
    a = gen_tree_motif(3, "cycle6", 1, seed)
    b = gen_tree_motif(3, "cycle6", 1, seed)
    assert np.array_equal(a.adj, b.adj)
    _check_invariants(a)


def test_subgraph_isolated_center():
    adj = np.zeros((3, 3), dtype=np.int8)
    g = Graph(3, adj, np.ones((3, 1)), np.zeros(3, dtype=np.int64))
    sub = extract_computational_subgraph(g, 1, hops=2)
    assert sub.n == 1
    assert sub.center == 0


def test_subgraph_whole_graph_when_hops_large():
    g = gen_ba_graph(12, 2, seed=0)
    sub = extract_computational_subgraph(g, 3, hops=100)
    assert sub.n == 12


def test_subgraph_cycle_by_hand():
    n = 6
    adj = np.zeros((n, n), dtype=np.int8)
    for i in range(n):
        adj[i, (i + 1) % n] = adj[(i + 1) % n, i] = 1
    g = Graph(n, adj, np.ones((n, 1)), np.zeros(n, dtype=np.int64))
    sub = extract_computational_subgraph(g, 0, hops=2)
    assert sub.n == 5
    assert set(sub.node_map.tolist()) == {0, 1, 2, 4, 5}
    assert sub.num_edges() == 4


def test_subgraph_invalid_center():
    g = gen_ba_graph(5, 1, seed=0)
    with pytest.raises(ParameterError):
        extract_computational_subgraph(g, 99, 2)


def test_dataset_round_trip(tmp_path):
    ds = gen_ba3motif(12, seed=4)
    path = tmp_path / "ds.jsonl"
    save_dataset(ds, str(path))
    back = load_dataset(str(path))
    assert back.task == ds.task
    assert back.num_classes == ds.num_classes
    assert len(back.graphs) == len(ds.graphs)
    for a, b in zip(ds.graphs, back.graphs):
        assert np.array_equal(a.adj, b.adj)
        assert a.y == b.y
    assert back.train_idx == ds.train_idx


def test_dataset_save_deterministic(tmp_path):
    ds = gen_ba3motif(9, seed=4)
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    save_dataset(ds, str(p1))
    save_dataset(ds, str(p2))
    assert p1.read_bytes() == p2.read_bytes()


def test_load_rejects_self_loop(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"task": "graph-classification", "num_classes": 2, '
                    '"feature_dim": 1, "train": [0], "val": [], "test": []}\n'
                    '{"n": 3, "edges": [[1, 1]], "y": 0}\n')
    with pytest.raises(DatasetFormatError, match="self-loop"):
        load_dataset(str(path))


def test_load_rejects_out_of_range_edge(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"task": "graph-classification", "num_classes": 2, '
                    '"feature_dim": 1, "train": [0], "val": [], "test": []}\n'
                    '{"n": 3, "edges": [[0, 7]], "y": 0}\n')
    with pytest.raises(DatasetFormatError, match=r"\[0,7\]"):
        load_dataset(str(path))


def test_load_reports_line_number(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"task": "graph-classification", "num_classes": 2, '
                    '"feature_dim": 1, "train": [0], "val": [], "test": []}\n'
                    'not json\n')
    with pytest.raises(DatasetFormatError, match=":2:"):
        load_dataset(str(path))
