"""Graph data model, synthetic motif datasets, and dataset file I/O."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

GRAPH_TASK = "graph-classification"
NODE_TASK = "node-classification"


class ParameterError(ValueError):
    pass


class DatasetFormatError(ValueError):
    pass


@dataclass
class Graph:
    n: int
    adj: np.ndarray          # n x n, {0,1}, symmetric, zero diagonal
    x: np.ndarray            # n x d features
    y: object                # int (graph task) or int array of length n (node task)
    center: int | None = None
    node_map: np.ndarray | None = None  # subgraph-local -> original node ids
    feature_kind: str = "ones"          # how x derives from structure

    def validate(self):
        if self.adj.shape != (self.n, self.n):
            raise DatasetFormatError("adjacency shape mismatch")
        if not np.array_equal(self.adj, self.adj.T):
            raise DatasetFormatError("adjacency not symmetric")
        if np.any(np.diag(self.adj) != 0):
            raise DatasetFormatError("self-loops not allowed")
        if self.x.shape[0] != self.n:
            raise DatasetFormatError("feature rows != node count")

    def num_edges(self) -> int:
        return int(self.adj.sum()) // 2

    def copy(self) -> "Graph":
        y = self.y.copy() if isinstance(self.y, np.ndarray) else self.y
        return Graph(self.n, self.adj.copy(), self.x.copy(), y, self.center,
                     None if self.node_map is None else self.node_map.copy(),
                     self.feature_kind)

    def refresh_features(self) -> "Graph":
        """Recompute structure-derived features after an adjacency edit.

        Constant features ("ones") are left untouched so externally supplied
        feature matrices survive; degree-based kinds must track the structure
        or the classifier would keep seeing the pre-edit graph.
        """
        if self.feature_kind != "ones":
            self.x = node_features(self.adj, self.feature_kind)
        return self


@dataclass
class Dataset:
    graphs: list
    task: str
    num_classes: int
    feature_dim: int
    train_idx: list = field(default_factory=list)
    val_idx: list = field(default_factory=list)
    test_idx: list = field(default_factory=list)
    feature_kind: str = "ones"

    def validate(self):
        for g in self.graphs:
            g.validate()
            if g.x.shape[1] != self.feature_dim:
                raise DatasetFormatError("inconsistent feature_dim")
        n_items = len(self.graphs) if self.task == GRAPH_TASK else self.graphs[0].n
        all_idx = sorted(self.train_idx) + sorted(self.val_idx) + sorted(self.test_idx)
        if sorted(all_idx) != list(range(n_items)):
            raise DatasetFormatError("splits must be disjoint and cover all indices")


def _empty_adj(n):
    return np.zeros((n, n), dtype=np.int8)


DEGREE_CAP = 6

FEATURE_DIMS = {"ones": 1, "degree": 1, "degree-onehot": DEGREE_CAP + 1}


def node_features(adj: np.ndarray, kind: str) -> np.ndarray:
    """Structure-derived node features: constant ones, scalar degree, or
    one-hot degree capped at DEGREE_CAP."""
    n = adj.shape[0]
    if kind == "ones":
        return np.ones((n, 1))
    if kind == "degree":
        return adj.sum(axis=1, dtype=np.float64).reshape(n, 1)
    if kind == "degree-onehot":
        deg = np.minimum(adj.sum(axis=1).astype(int), DEGREE_CAP)
        x = np.zeros((n, DEGREE_CAP + 1))
        x[np.arange(n), deg] = 1.0
        return x
    raise ParameterError(f"unknown feature kind {kind!r}")


def _add_edge(adj, i, j):
    adj[i, j] = 1
    adj[j, i] = 1


def make_splits(n_items: int, rng: np.random.Generator,
                frac=(0.8, 0.1, 0.1)):
    """Seeded 80/10/10 shuffle split."""
    order = rng.permutation(n_items)
    n_train = int(round(frac[0] * n_items))
    n_val = int(round(frac[1] * n_items))
    return (sorted(int(i) for i in order[:n_train]),
            sorted(int(i) for i in order[n_train:n_train + n_val]),
            sorted(int(i) for i in order[n_train + n_val:]))


# -- generators --------------------------------------------------------------


def gen_ba_adj(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """Barabasi-Albert preferential attachment; seeded with an (m+1)-clique."""
    if n <= m or m < 1:
        raise ParameterError(f"BA requires n > m >= 1, got n={n}, m={m}")
    adj = _empty_adj(n)
    m0 = m + 1
    for i in range(m0):
        for j in range(i + 1, m0):
            _add_edge(adj, i, j)
    # repeated-node list realizes degree-proportional attachment
    targets = [v for i in range(m0) for v in (i,) * m]
    for v in range(m0, n):
        chosen = set()
        while len(chosen) < m:
            chosen.add(targets[rng.integers(len(targets))])
        for u in chosen:
            _add_edge(adj, v, u)
            targets.extend((u, v))
    return adj


def gen_ba_graph(n: int, m: int, seed: int) -> Graph:
    rng = np.random.default_rng(seed)
    adj = gen_ba_adj(n, m, rng)
    return Graph(n, adj, np.ones((n, 1)), 0)


# Motif templates: edge lists on locally numbered nodes.
MOTIFS = {
    "cycle6": (6, [(i, (i + 1) % 6) for i in range(6)]),
    "grid3x3": (9, [(3 * r + c, 3 * r + c + 1) for r in range(3) for c in range(2)]
                + [(3 * r + c, 3 * (r + 1) + c) for r in range(2) for c in range(3)]),
    # square a-b-c-d plus roof apex e joined to a and b
    "house5": (5, [(0, 1), (1, 2), (2, 3), (3, 0), (4, 0), (4, 1)]),
}


def _attach_motif(adj_rows, labels, motif: str, rng) -> tuple:
    """Append a motif component and one random attachment edge; returns
    (new adjacency, labels)."""
    size, edges = MOTIFS[motif]
    n_old = adj_rows.shape[0]
    n_new = n_old + size
    adj = _empty_adj(n_new)
    adj[:n_old, :n_old] = adj_rows
    for a, b in edges:
        _add_edge(adj, n_old + a, n_old + b)
    base = int(rng.integers(n_old))
    port = n_old + int(rng.integers(size))
    _add_edge(adj, base, port)
    labels = np.concatenate([labels, np.ones(size, dtype=np.int64)])
    return adj, labels


def gen_tree_motif(depth: int, motif: str, num_motifs: int, seed: int,
                   features: str = "ones") -> Graph:
    """Balanced binary tree with `num_motifs` motifs attached by one edge each.

    Labels: 0 = tree node, 1 = motif member.
    """
    if depth < 2:
        raise ParameterError("depth must be >= 2")
    if motif not in ("cycle6", "grid3x3"):
        raise ParameterError(f"unknown tree motif {motif!r}")
    rng = np.random.default_rng(seed)
    n_tree = 2 ** depth - 1
    adj = _empty_adj(n_tree)
    for v in range(1, n_tree):
        _add_edge(adj, v, (v - 1) // 2)
    labels = np.zeros(n_tree, dtype=np.int64)
    # attachment points only on the tree, matching label semantics
    tree_n = n_tree
    for _ in range(num_motifs):
        size, edges = MOTIFS[motif]
        n_old = adj.shape[0]
        new = _empty_adj(n_old + size)
        new[:n_old, :n_old] = adj
        for a, b in edges:
            _add_edge(new, n_old + a, n_old + b)
        base = int(rng.integers(tree_n))
        port = n_old + int(rng.integers(size))
        _add_edge(new, base, port)
        adj = new
        labels = np.concatenate([labels, np.ones(size, dtype=np.int64)])
    n = adj.shape[0]
    return Graph(n, adj, node_features(adj, features), labels,
                 feature_kind=features)


def gen_tree_motif_dataset(depth: int, motif: str, num_motifs: int,
                           seed: int, features: str = "ones") -> Dataset:
    g = gen_tree_motif(depth, motif, num_motifs, seed, features)
    rng = np.random.default_rng((seed, 1))
    tr, va, te = make_splits(g.n, rng)
    ds = Dataset([g], NODE_TASK, 2, FEATURE_DIMS[features], tr, va, te,
                 feature_kind=features)
    ds.validate()
    return ds


BA3_CLASSES = ("cycle6", "grid3x3", "house5")


def gen_ba3motif(num_graphs: int, seed: int, base_n=(13, 25), m: int = 1,
                 features: str = "ones") -> Dataset:
    """Balanced 3-class set: BA base + one attached motif; class = motif."""
    if num_graphs < 3:
        raise ParameterError("need at least 3 graphs")
    rng = np.random.default_rng(seed)
    graphs = []
    per_class = num_graphs // 3
    counts = [per_class] * 3
    for i in range(num_graphs - 3 * per_class):
        counts[i] += 1
    for cls, count in enumerate(counts):
        for _ in range(count):
            n_base = int(rng.integers(base_n[0], base_n[1] + 1))
            adj = gen_ba_adj(n_base, m, rng)
            labels = np.zeros(n_base, dtype=np.int64)
            adj, _ = _attach_motif(adj, labels, BA3_CLASSES[cls], rng)
            n = adj.shape[0]
            graphs.append(Graph(n, adj, node_features(adj, features), cls,
                                feature_kind=features))
    order = rng.permutation(len(graphs))
    graphs = [graphs[i] for i in order]
    tr, va, te = make_splits(len(graphs), np.random.default_rng((seed, 2)))
    ds = Dataset(graphs, GRAPH_TASK, 3, FEATURE_DIMS[features], tr, va, te,
                 feature_kind=features)
    ds.validate()
    return ds


# -- computational subgraphs -------------------------------------------------


def extract_computational_subgraph(g: Graph, center: int, hops: int) -> Graph:
    """Induced subgraph on nodes within `hops` of `center`."""
    if not (0 <= center < g.n):
        raise ParameterError(f"center {center} out of range")
    if hops < 0:
        raise ParameterError("hops must be >= 0")
    dist = np.full(g.n, -1)
    dist[center] = 0
    frontier = [center]
    d = 0
    while frontier and d < hops:
        d += 1
        nxt = []
        for v in frontier:
            for u in np.nonzero(g.adj[v])[0]:
                if dist[u] < 0:
                    dist[u] = d
                    nxt.append(int(u))
        frontier = nxt
    keep = np.nonzero(dist >= 0)[0]
    sub_adj = g.adj[np.ix_(keep, keep)].copy()
    y = g.y[keep] if isinstance(g.y, np.ndarray) else g.y
    new_center = int(np.searchsorted(keep, center))
    # structure-derived features are recomputed from the subgraph so the
    # instance is self-consistent (boundary nodes lose outside neighbors)
    if g.feature_kind != "ones":
        sub_x = node_features(sub_adj, g.feature_kind)
    else:
        sub_x = g.x[keep].copy()
    return Graph(len(keep), sub_adj, sub_x, y, center=new_center,
                 node_map=keep.copy(), feature_kind=g.feature_kind)


# -- file I/O ----------------------------------------------------------------


def save_dataset(ds: Dataset, path: str) -> None:
    ds.validate()
    with open(path, "w") as fh:
        header = {"task": ds.task, "num_classes": ds.num_classes,
                  "feature_dim": ds.feature_dim, "feature_kind": ds.feature_kind,
                  "train": ds.train_idx, "val": ds.val_idx, "test": ds.test_idx}
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for g in ds.graphs:
            iu, ju = np.nonzero(np.triu(g.adj, 1))
            rec = {"n": int(g.n),
                   "edges": [[int(i), int(j)] for i, j in zip(iu, ju)],
                   "y": g.y.tolist() if isinstance(g.y, np.ndarray) else int(g.y)}
            if not np.all(g.x == 1.0) or g.x.shape[1] != 1:
                rec["x"] = g.x.tolist()
            if g.center is not None:
                rec["center"] = int(g.center)
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_dataset(path: str) -> Dataset:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DatasetFormatError(f"{path}: empty file")
    try:
        header = json.loads(lines[0])
        task = header["task"]
        num_classes = int(header["num_classes"])
        feature_dim = int(header["feature_dim"])
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise DatasetFormatError(f"{path}:1: bad header ({e})") from e
    graphs = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            n = int(rec["n"])
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise DatasetFormatError(f"{path}:{lineno}: bad record ({e})") from e
        adj = _empty_adj(n)
        for i, j in rec.get("edges", []):
            if not (0 <= i < n and 0 <= j < n):
                raise DatasetFormatError(
                    f"{path}:{lineno}: edge index [{i},{j}] out of range (n={n})")
            if i == j:
                raise DatasetFormatError(f"{path}:{lineno}: self-loop [{i},{j}]")
            _add_edge(adj, i, j)
        if "x" in rec:
            x = np.asarray(rec["x"], dtype=np.float64)
            if x.shape != (n, feature_dim):
                raise DatasetFormatError(f"{path}:{lineno}: feature shape mismatch")
        else:
            x = np.ones((n, feature_dim))
        y = rec["y"]
        y = np.asarray(y, dtype=np.int64) if isinstance(y, list) else int(y)
        graphs.append(Graph(n, adj, x, y, center=rec.get("center"),
                            feature_kind=header.get("feature_kind", "ones")))
    ds = Dataset(graphs, task, num_classes, feature_dim,
                 header.get("train", []), header.get("val", []),
                 header.get("test", []), header.get("feature_kind", "ones"))
    ds.validate()
    return ds
