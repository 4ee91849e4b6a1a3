"""Denoising network over n x n x c pair tensors, conditioned on noise level.

The network predicts clean-edge probabilities from a noisy adjacency matrix,
the original node features, and the cumulative flip probability.  Blocks use
channel-wise matrix products, so relabeling nodes commutes with the forward
pass (permutation equivariance).
"""

from __future__ import annotations

import numpy as np

from . import checkpoint
from .diffusion import NoiseLevel
from .graphs import Graph
from .tensor import ShapeError, Tensor

TIME_HIDDEN = 16


def _init_linear(rng, c_in, c_out):
    return (Tensor.param(rng.normal(0, np.sqrt(2.0 / c_in), (c_in, c_out))),
            Tensor.param(np.zeros(c_out)))


def _mlp2(params: dict, prefix: str, m: Tensor) -> Tensor:
    """Entrywise 2-layer MLP on a flat (pairs, channels) tensor."""
    h = (m.matmul(params[f"{prefix}.w1"]) + params[f"{prefix}.b1"]).relu()
    return h.matmul(params[f"{prefix}.w2"]) + params[f"{prefix}.b2"]


def conditioning_features(g: Graph, feature_dim: int) -> np.ndarray:
    """Feature matrix fed to the denoiser.

    A denoiser that expects one channel more than the graph provides gets a
    center-indicator column appended, so node-task counterfactuals can target
    the node being explained rather than a population average.
    """
    d = g.x.shape[1]
    if feature_dim == d:
        return g.x
    if feature_dim == d + 1:
        indicator = np.zeros((g.n, 1))
        if g.center is not None:
            indicator[g.center, 0] = 1.0
        return np.concatenate([g.x, indicator], axis=1)
    raise ShapeError(f"denoiser expects {feature_dim} feature channels, "
                     f"graph provides {d}")


def _channel_matmul(a: Tensor, b: Tensor, n: int) -> Tensor:
    """Per-channel n x n matrix product of two flat (n*n, h) tensors."""
    h = a.shape[1]
    am = a.reshape(n, n, h).transpose((2, 0, 1))
    bm = b.reshape(n, n, h).transpose((2, 0, 1))
    # 1/n scaling keeps pre-activations O(1) regardless of graph size
    return am.matmul(bm).transpose((1, 2, 0)).reshape(n * n, h) * (1.0 / n)


class PpgnDenoiser:
    def __init__(self, params: dict, blocks: int, hidden: int, feature_dim: int):
        self.params = params
        self.blocks = blocks
        self.hidden = hidden
        self.feature_dim = feature_dim

    @property
    def in_channels(self) -> int:
        return 2 * self.feature_dim + 3

    @staticmethod
    def init(feature_dim: int, blocks: int = 6, hidden: int = 64,
             seed: int = 0) -> "PpgnDenoiser":
        rng = np.random.default_rng(seed)
        p = {}

        def add(prefix, c_in, c_hid, c_out):
            p[f"{prefix}.w1"], p[f"{prefix}.b1"] = _init_linear(rng, c_in, c_hid)
            p[f"{prefix}.w2"], p[f"{prefix}.b2"] = _init_linear(rng, c_hid, c_out)

        add("ppgn.time_mlp", 1, TIME_HIDDEN, 1)
        c = 2 * feature_dim + 3
        for i in range(blocks):
            c_in = c if i == 0 else hidden
            add(f"ppgn.block{i}.m1", c_in, hidden, hidden)
            add(f"ppgn.block{i}.m2", c_in, hidden, hidden)
            add(f"ppgn.block{i}.skip", c_in, hidden, hidden)
            add(f"ppgn.block{i}.mix", 2 * hidden, hidden, hidden)
        add("ppgn.out", blocks * hidden, hidden, 1)
        # small output head keeps untrained logits near zero
        p["ppgn.out.w2"].data *= 0.1
        return PpgnDenoiser(p, blocks, hidden, feature_dim)

    # -- forward -------------------------------------------------------------

    def build_input(self, g_t: Graph, x0: np.ndarray, level: NoiseLevel) -> Tensor:
        """Flat (n*n, 2d+3) tensor: one-hot A_t, pairwise features, time channel."""
        n = g_t.n
        if x0.shape[0] != n or x0.shape[1] != self.feature_dim:
            raise ShapeError(f"feature matrix {x0.shape} incompatible with n={n}, "
                             f"d={self.feature_dim}")
        at = g_t.adj.astype(np.float64).reshape(n * n, 1)
        one_hot = np.concatenate([1.0 - at, at], axis=1)
        xi = np.repeat(x0, n, axis=0)               # row i of pair (i, j)
        xj = np.tile(x0, (n, 1))                    # row j of pair (i, j)
        const = Tensor(np.concatenate([one_hot, xi, xj], axis=1))
        time_in = Tensor((level.beta_bar * np.eye(n)).reshape(n * n, 1))
        time_channel = _mlp2(self.params, "ppgn.time_mlp", time_in)
        return Tensor.concat([const, time_channel], axis=1)

    def forward(self, m_in: Tensor, n: int) -> Tensor:
        """Dense adjacency probabilities: symmetric, zero diagonal, (0,1)."""
        if m_in.shape != (n * n, self.in_channels):
            raise ShapeError(f"input shape {m_in.shape} != ({n * n}, {self.in_channels})")
        h = m_in
        outs = []
        for i in range(self.blocks):
            prefix = f"ppgn.block{i}"
            prod = _channel_matmul(_mlp2(self.params, f"{prefix}.m1", h),
                                   _mlp2(self.params, f"{prefix}.m2", h), n)
            skip = _mlp2(self.params, f"{prefix}.skip", h)
            h = _mlp2(self.params, f"{prefix}.mix", Tensor.concat([prod, skip], axis=1))
            outs.append(h)
        stacked = Tensor.concat(list(reversed(outs)), axis=1)
        raw = _mlp2(self.params, "ppgn.out", stacked).reshape(n, n)
        sym = (raw + raw.T) * 0.5
        probs = sym.sigmoid()
        return probs * Tensor(1.0 - np.eye(n))

    def denoise(self, g_t: Graph, x0: np.ndarray, level: NoiseLevel) -> Tensor:
        return self.forward(self.build_input(g_t, x0, level), g_t.n)

    # -- persistence ---------------------------------------------------------

    def save(self, path: str) -> None:
        tensors = dict(self.params)
        tensors["ppgn.meta"] = Tensor(np.array(
            [self.blocks, self.hidden, self.feature_dim], dtype=np.float64))
        checkpoint.save_tensors(path, tensors)

    @staticmethod
    def load(path: str, trainable: bool = False) -> "PpgnDenoiser":
        tensors = checkpoint.load_tensors(path, requires_grad=trainable)
        meta = tensors.pop("ppgn.meta").data
        blocks, hidden, feature_dim = (int(v) for v in meta)
        return PpgnDenoiser(tensors, blocks, hidden, feature_dim)
