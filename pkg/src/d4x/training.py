"""Explainer training: re-weighted reconstruction loss, counterfactual loss,
and the relaxed-Bernoulli bridge into the frozen classifier."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diffusion import DEFAULT_T, NoiseLevel, corrupt, sample_noise_level
from .gcn import GcnClassifier
from .graphs import (DEGREE_CAP, Dataset, Graph, GRAPH_TASK,
                     extract_computational_subgraph)
from .ppgn import PpgnDenoiser, conditioning_features
from .tensor import AdamState, Tensor, adam_step, lr_decay, zero_grads

MODE_CF = "counterfactual"
MODE_MODEL_LEVEL = "model-level"


@dataclass
class TrainConfig:
    alpha: float = 0.1
    T: int = DEFAULT_T
    epochs: int = 300
    batch: int = 32
    lr: float = 1e-3
    gamma: float = 0.998
    lam: float = 1.0            # Concrete temperature
    eps: float = 1e-7           # clamp inside every log
    blocks: int = 6
    hidden: int = 64
    seed: int = 0
    mode: str = MODE_CF
    max_instances: int | None = None

    def __post_init__(self):
        if self.alpha < 0 or self.lam <= 0 or not (0 < self.eps < 0.5):
            raise ValueError("invalid training configuration")


def _upper_mask(n: int) -> np.ndarray:
    return np.triu(np.ones((n, n)), 1)


def distribution_loss(dense: Tensor, g0: Graph, level: NoiseLevel, T: int,
                      eps: float = 1e-7) -> Tensor:
    """(1 - 2*beta_bar + 1/T) times the mean BCE over unordered pairs."""
    n = g0.n
    pairs = n * (n - 1) // 2
    if pairs == 0:
        return Tensor(0.0)
    a0 = g0.adj.astype(np.float64)
    p = dense.clamp(eps, 1.0 - eps)
    mask = Tensor(_upper_mask(n))
    ll = Tensor(a0) * p.log() + Tensor(1.0 - a0) * (1.0 - p).log()
    bce = -(ll * mask).sum() * (1.0 / pairs)
    weight = 1.0 - 2.0 * level.beta_bar + 1.0 / T
    return bce * weight


def sample_concrete(dense: Tensor, lam: float, rng: np.random.Generator,
                    eps: float = 1e-7) -> Tensor:
    """Relaxed Bernoulli draw per unordered pair, mirrored, zero diagonal.

    sigma((logit(p) + logit(u)) / lam) with u ~ Uniform(0,1); gradients flow
    through p only.
    """
    n = dense.shape[0]
    p = dense.clamp(eps, 1.0 - eps)
    u = rng.random((n, n))
    u = np.triu(u, 1)
    u = u + u.T + 0.5 * np.eye(n)        # mirrored noise, neutral diagonal
    u = np.clip(u, eps, 1.0 - eps)
    noise = Tensor(np.log(u) - np.log(1.0 - u))
    logit_p = p.log() - (1.0 - p).log()
    relaxed = ((logit_p + noise) * (1.0 / lam)).sigmoid()
    return relaxed * Tensor(1.0 - np.eye(n))


def soft_node_features(relaxed: Tensor, kind: str) -> Tensor | None:
    """Differentiable node features of a relaxed adjacency (None for "ones").

    Agrees exactly with graphs.node_features on hard 0/1 adjacencies: scalar
    degree is the row sum; the one-hot variant interpolates triangularly
    between the two neighboring integer bins so gradients reach the classifier
    through fractional edge weights.
    """
    if kind == "ones":
        return None
    n = relaxed.shape[0]
    deg = relaxed.sum(axis=1).reshape(n, 1)
    if kind == "degree":
        return deg
    deg = deg.clamp(0.0, float(DEGREE_CAP))
    cols = []
    for k in range(DEGREE_CAP + 1):
        diff = deg - float(k)
        dist = diff.relu() + (-diff).relu()
        cols.append((1.0 - dist).clamp(0.0, 1.0))
    return Tensor.concat(cols, axis=1)


def counterfactual_loss(classifier: GcnClassifier, relaxed: Tensor,
                        x0: np.ndarray, original_label: int,
                        center: int | None = None, eps: float = 1e-7,
                        feature_kind: str = "ones") -> Tensor:
    """-log(1 - f(relaxed)[original_label]), clamped away from -inf.

    Structure-derived feature kinds are recomputed differentiably from the
    relaxed adjacency; otherwise the clean features x0 are used.  Without the
    recomputation the classifier's response to edge additions (felt mostly
    through changed degrees) is invisible to the training gradient.
    """
    soft = soft_node_features(relaxed, feature_kind)
    probs = classifier.forward(relaxed, soft if soft is not None else x0)
    if classifier.task != GRAPH_TASK:
        probs = probs[center if center is not None else 0]
    p_orig = probs[original_label]
    return -((1.0 - p_orig).clamp(eps, 1.0).log())


def explanation_instances(ds: Dataset, classifier: GcnClassifier,
                          idx=None, max_instances: int | None = None,
                          rng: np.random.Generator | None = None) -> list:
    """Instances to explain: graphs (graph task) or computational subgraphs
    around each node (node task), with hops = classifier layer count."""
    if ds.task == GRAPH_TASK:
        pool = [ds.graphs[i] for i in (idx if idx is not None else range(len(ds.graphs)))]
    else:
        g = ds.graphs[0]
        nodes = idx if idx is not None else range(g.n)
        pool = [extract_computational_subgraph(g, v, classifier.layers) for v in nodes]
    if max_instances is not None and len(pool) > max_instances:
        rng = rng or np.random.default_rng(0)
        keep = sorted(rng.choice(len(pool), size=max_instances, replace=False))
        pool = [pool[i] for i in keep]
    return pool


def train_explainer(ds: Dataset, classifier: GcnClassifier, cfg: TrainConfig,
                    trace_path: str | None = None, log=None) -> PpgnDenoiser:
    """Optimize the denoiser against the frozen classifier.

    Per instance and step: sample beta_bar ~ U[0, 0.5], corrupt, denoise,
    reconstruction loss (+ alpha * counterfactual loss through one Concrete
    sample in counterfactual mode); Adam per batch, exponential decay per epoch.
    """
    frozen = classifier.freeze()
    rng = np.random.default_rng((cfg.seed, 21))
    instances = explanation_instances(ds, frozen, idx=ds.train_idx,
                                      max_instances=cfg.max_instances,
                                      rng=np.random.default_rng((cfg.seed, 22)))
    labels = [frozen.predict(g)[0] for g in instances]
    den_dim = ds.feature_dim
    if ds.task != GRAPH_TASK and cfg.mode == MODE_CF:
        den_dim += 1          # center-indicator channel for node-level targets
    denoiser = PpgnDenoiser.init(den_dim, cfg.blocks, cfg.hidden, cfg.seed)
    state = AdamState(denoiser.params, lr=cfg.lr)
    trace = []
    last_good = {k: v.data.copy() for k, v in denoiser.params.items()}
    for epoch in range(cfg.epochs):
        state.lr = lr_decay(cfg.lr, cfg.gamma, epoch)
        order = rng.permutation(len(instances))
        ep_dist = ep_cf = 0.0
        for start in range(0, len(order), cfg.batch):
            chunk = order[start:start + cfg.batch]
            zero_grads(denoiser.params)
            total = None
            for i in chunk:
                g0 = instances[i]
                level = sample_noise_level(rng, cfg.T)
                g_t = corrupt(g0, level, rng)
                if cfg.mode == MODE_MODEL_LEVEL:
                    # the sampler can only condition on the noisy graph it
                    # holds, so train against that graph's own features
                    cond = g_t.refresh_features()
                else:
                    cond = g0
                dense = denoiser.denoise(
                    g_t, conditioning_features(cond, denoiser.feature_dim), level)
                l_dist = distribution_loss(dense, g0, level, cfg.T, cfg.eps)
                loss = l_dist
                if cfg.mode == MODE_CF and cfg.alpha > 0:
                    relaxed = sample_concrete(dense, cfg.lam, rng, cfg.eps)
                    l_cf = counterfactual_loss(frozen, relaxed, g0.x, labels[i],
                                               g0.center, cfg.eps,
                                               feature_kind=g0.feature_kind)
                    loss = loss + l_cf * cfg.alpha
                    ep_cf += float(l_cf.data)
                ep_dist += float(l_dist.data)
                total = loss if total is None else total + loss
            total = total * (1.0 / len(chunk))
            if not np.isfinite(total.data):
                for k, v in last_good.items():
                    denoiser.params[k].data = v
                raise FloatingPointError(
                    f"non-finite loss at epoch {epoch}; restored last checkpoint")
            total.backward()
            adam_step(denoiser.params, state)
        last_good = {k: v.data.copy() for k, v in denoiser.params.items()}
        row = (epoch, ep_dist / len(instances), ep_cf / len(instances),
               (ep_dist + cfg.alpha * ep_cf) / len(instances))
        trace.append(row)
        if log is not None:
            log(*row)
    if trace_path is not None:
        with open(trace_path, "w") as fh:
            fh.write("epoch,l_dist,l_cf,total\n")
            for epoch, l_dist, l_cf, tot in trace:
                fh.write(f"{epoch},{l_dist:.6f},{l_cf:.6f},{tot:.6f}\n")
    return denoiser
