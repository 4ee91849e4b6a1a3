"""Discrete forward diffusion over adjacency matrices.

Each unordered node pair flips presence independently with cumulative
probability beta_bar; beta_bar = 0.5 corresponds to pure ER(1/2) noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import Graph, ParameterError


@dataclass
class NoiseLevel:
    t: int
    beta_bar: float


@dataclass
class NoiseSchedule:
    T: int
    beta_bar: np.ndarray  # length T, nondecreasing, within [0, 0.5]

    @staticmethod
    def linear(T: int) -> "NoiseSchedule":
        return NoiseSchedule(T, 0.5 * np.arange(1, T + 1) / T)


DEFAULT_T = 100


def compose_beta_bar(betas) -> float:
    """Cumulative flip probability 1/2 - 1/2 * prod(1 - 2 beta_i)."""
    betas = np.asarray(betas, dtype=np.float64)
    if np.any((betas < 0) | (betas > 0.5)):
        raise ParameterError("per-step flip probabilities must lie in [0, 0.5]")
    return float(0.5 - 0.5 * np.prod(1.0 - 2.0 * betas))


def sample_noise_level(rng: np.random.Generator, T: int = DEFAULT_T) -> NoiseLevel:
    """beta_bar ~ Uniform[0, 0.5]; t = round(2 * beta_bar * T) for weighting."""
    beta_bar = 0.5 * rng.random()
    return NoiseLevel(t=int(round(2.0 * beta_bar * T)), beta_bar=beta_bar)


def transition_probability(a0: int, at: int, beta_bar: float) -> float:
    """q(a_t | a_0) for a single pair: beta_bar off-diagonal, else 1 - beta_bar."""
    if a0 not in (0, 1) or at not in (0, 1):
        raise ParameterError("bits must be 0 or 1")
    return beta_bar if a0 != at else 1.0 - beta_bar


def corrupt_adj(adj: np.ndarray, beta_bar: float, rng: np.random.Generator) -> np.ndarray:
    """Flip each unordered pair with probability beta_bar; mirrored, zero diag."""
    n = adj.shape[0]
    flips = rng.random((n, n)) < beta_bar
    flips = np.triu(flips, 1)
    out = adj.astype(np.int8).copy()
    out[flips] ^= 1
    out = np.triu(out, 1)
    return out + out.T


def corrupt(g: Graph, level: NoiseLevel, rng: np.random.Generator) -> Graph:
    out = g.copy()
    out.adj = corrupt_adj(g.adj, level.beta_bar, rng)
    return out
