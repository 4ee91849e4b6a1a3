"""Target graph-convolutional classifier (trained once, then frozen).

Accepts hard or relaxed adjacency: propagation uses symmetric normalization
D^-1/2 (A + I) D^-1/2 with real-valued degrees, so the forward pass is
differentiable w.r.t. every adjacency entry.
"""

from __future__ import annotations

import numpy as np

from . import checkpoint
from .graphs import Dataset, Graph, GRAPH_TASK, NODE_TASK
from .tensor import AdamState, ContractError, Tensor, adam_step, lr_decay, zero_grads

TASK_CODES = {GRAPH_TASK: 0, NODE_TASK: 1}
TASK_NAMES = {v: k for k, v in TASK_CODES.items()}


class GcnClassifier:
    def __init__(self, params: dict, layers: int, hidden: int, task: str,
                 num_classes: int, feature_dim: int):
        self.params = params
        self.layers = layers
        self.hidden = hidden
        self.task = task
        self.num_classes = num_classes
        self.feature_dim = feature_dim

    @staticmethod
    def init(task: str, feature_dim: int, num_classes: int,
             layers: int = 3, hidden: int = 32, seed: int = 0) -> "GcnClassifier":
        rng = np.random.default_rng(seed)
        params = {}
        d_in = feature_dim
        for i in range(layers):
            scale = np.sqrt(2.0 / d_in)
            params[f"gcn.layer{i}.weight"] = Tensor.param(
                rng.normal(0, scale, (d_in, hidden)))
            # biases break the rank-1 collapse that constant scalar features
            # would otherwise induce across layers
            params[f"gcn.layer{i}.bias"] = Tensor.param(
                rng.normal(0, 0.1, (hidden,)))
            d_in = hidden
        params["gcn.readout.weight"] = Tensor.param(
            rng.normal(0, np.sqrt(1.0 / hidden), (hidden, num_classes)))
        params["gcn.readout.bias"] = Tensor.param(np.zeros(num_classes))
        return GcnClassifier(params, layers, hidden, task, num_classes, feature_dim)

    def freeze(self) -> "GcnClassifier":
        """Read-only view: no tensor requires grad, so backprop never writes here."""
        frozen = {k: Tensor(v.data) for k, v in self.params.items()}
        return GcnClassifier(frozen, self.layers, self.hidden, self.task,
                             self.num_classes, self.feature_dim)

    # -- forward -------------------------------------------------------------

    def forward(self, adj, features) -> Tensor:
        """Class probabilities: (C,) for graph task, (n, C) for node task."""
        a = adj if isinstance(adj, Tensor) else Tensor(adj)
        x = features if isinstance(features, Tensor) else Tensor(features)
        if np.max(np.abs(a.data - a.data.T)) > 1e-9:
            raise ContractError("adjacency must be symmetric")
        n = a.shape[0]
        a_hat = a + Tensor(np.eye(n))
        deg = a_hat.sum(axis=1)                       # >= 1, safe to invert
        d_inv_sqrt = deg.pow_const(-0.5)
        norm = d_inv_sqrt.reshape(n, 1) * a_hat * d_inv_sqrt.reshape(1, n)
        h = x
        for i in range(self.layers):
            h = (norm.matmul(h).matmul(self.params[f"gcn.layer{i}.weight"])
                 + self.params[f"gcn.layer{i}.bias"])
            if i < self.layers - 1:
                h = h.relu()
        if self.task == GRAPH_TASK:
            h = h.mean(axis=0).reshape(1, self.hidden)
        logits = (h.matmul(self.params["gcn.readout.weight"])
                  + self.params["gcn.readout.bias"])
        probs = softmax_rows(logits)
        return probs.reshape(self.num_classes) if self.task == GRAPH_TASK else probs

    def predict(self, g: Graph):
        """(label, probability vector); ties break toward the lowest class."""
        probs = self.forward(g.adj.astype(np.float64), g.x)
        p = probs.data
        if self.task == NODE_TASK:
            center = g.center if g.center is not None else 0
            p = p[center]
        return int(np.argmax(p)), p

    # -- persistence ---------------------------------------------------------

    def save(self, path: str) -> None:
        tensors = dict(self.params)
        tensors["gcn.meta"] = Tensor(np.array(
            [self.layers, self.hidden, TASK_CODES[self.task],
             self.num_classes, self.feature_dim], dtype=np.float64))
        checkpoint.save_tensors(path, tensors)

    @staticmethod
    def load(path: str) -> "GcnClassifier":
        tensors = checkpoint.load_tensors(path)
        meta = tensors.pop("gcn.meta").data
        layers, hidden, task_code, num_classes, feature_dim = (int(v) for v in meta)
        return GcnClassifier(tensors, layers, hidden, TASK_NAMES[task_code],
                             num_classes, feature_dim)


def softmax_rows(logits: Tensor) -> Tensor:
    """Row softmax; the max shift is a constant, so gradients stay exact."""
    shift = Tensor(logits.data.max(axis=-1, keepdims=True))
    e = (logits - shift).exp()
    return e / e.sum(axis=-1).reshape(*e.shape[:-1], 1)


def _nll(probs: Tensor, label: int, eps: float = 1e-12) -> Tensor:
    return -(probs[label].clamp(eps, 1.0).log())


def _accuracy(clf: GcnClassifier, ds: Dataset, idx) -> float:
    if clf.task == GRAPH_TASK:
        hits = sum(clf.predict(ds.graphs[i])[0] == ds.graphs[i].y for i in idx)
        return hits / len(idx)
    g = ds.graphs[0]
    probs = clf.forward(g.adj.astype(np.float64), g.x).data
    pred = np.argmax(probs, axis=1)
    return float(np.mean(pred[idx] == g.y[idx]))


def train_classifier(ds: Dataset, epochs: int = 200, lr: float = 1e-3,
                     gamma: float = 0.998, layers: int = 3, hidden: int = 32,
                     batch: int = 32, seed: int = 0, smoothing: float = 0.0,
                     log=None):
    """Cross-entropy training with Adam; keeps the best-validation parameters.

    `smoothing` mixes the one-hot targets with the uniform distribution
    (label smoothing), which caps output confidence without touching the
    argmax; soft-margin classifiers respond more readily to edge edits.
    Returns (classifier, test_accuracy).
    """
    if not (0.0 <= smoothing < 1.0):
        raise ValueError("smoothing must lie in [0, 1)")
    clf = GcnClassifier.init(ds.task, ds.feature_dim, ds.num_classes,
                             layers, hidden, seed)
    state = AdamState(clf.params, lr=lr)
    rng = np.random.default_rng((seed, 11))
    best_val, best = -1.0, None
    for epoch in range(epochs):
        state.lr = lr_decay(lr, gamma, epoch)
        if ds.task == GRAPH_TASK:
            order = rng.permutation(ds.train_idx)
            for start in range(0, len(order), batch):
                zero_grads(clf.params)
                chunk = order[start:start + batch]
                loss = None
                for i in chunk:
                    g = ds.graphs[i]
                    probs = clf.forward(g.adj.astype(np.float64), g.x)
                    logp = probs.clamp(1e-12, 1.0).log()
                    soft = np.full(ds.num_classes, smoothing / ds.num_classes)
                    soft[g.y] += 1.0 - smoothing
                    term = -(logp * Tensor(soft)).sum()
                    loss = term if loss is None else loss + term
                loss = loss * (1.0 / len(chunk))
                if not np.isfinite(loss.data):
                    raise FloatingPointError("non-finite training loss")
                loss.backward()
                adam_step(clf.params, state)
        else:
            g = ds.graphs[0]
            zero_grads(clf.params)
            probs = clf.forward(g.adj.astype(np.float64), g.x)
            logp = probs.clamp(1e-12, 1.0).log()
            hot = np.full((g.n, ds.num_classes), smoothing / ds.num_classes)
            hot[np.arange(g.n), g.y] += 1.0 - smoothing
            mask = np.zeros((g.n, 1))
            mask[ds.train_idx] = 1.0
            loss = -(logp * Tensor(hot) * Tensor(mask)).sum() * (1.0 / len(ds.train_idx))
            if not np.isfinite(loss.data):
                raise FloatingPointError("non-finite training loss")
            loss.backward()
            adam_step(clf.params, state)
        val_acc = _accuracy(clf, ds, ds.val_idx)
        if val_acc > best_val:
            best_val = val_acc
            best = {k: v.data.copy() for k, v in clf.params.items()}
        if log is not None:
            log(epoch, float(loss.data), val_acc)
    for k, v in best.items():
        clf.params[k].data = v
    test_acc = _accuracy(clf, ds, ds.test_idx)
    return clf, test_acc
