"""Independent brute-force oracles for the test suite.

These share no code with the modules they check: finite differences validate
autodiff, exhaustive enumeration validates the corruption process, and a
greedy-transport EMD validates the cumulative-sum EMD in the metrics module.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np


@dataclass
class OracleReport:
    name: str
    oracle_value: float
    impl_value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return abs(self.oracle_value - self.impl_value) <= self.tolerance


def oracle_finite_diff(fn, point: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function, per coordinate."""
    if h <= 0:
        raise ValueError("h must be positive")
    point = np.asarray(point, dtype=np.float64)
    grad = np.zeros_like(point)
    it = np.nditer(point, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        plus = point.copy()
        minus = point.copy()
        plus[idx] += h
        minus[idx] -= h
        grad[idx] = (fn(plus) - fn(minus)) / (2 * h)
        it.iternext()
    return grad


def oracle_transition_enumeration(adj: np.ndarray, beta_bar: float) -> dict:
    """Exact distribution over all 2^P corrupted adjacency matrices.

    Keys are upper-triangle bit tuples; refuses more than 10 pairs.
    """
    n = adj.shape[0]
    iu, ju = np.triu_indices(n, 1)
    pairs = len(iu)
    if pairs > 10:
        raise ValueError("enumeration capped at 10 unordered pairs")
    base = tuple(int(adj[i, j]) for i, j in zip(iu, ju))
    table = {}
    for outcome in product((0, 1), repeat=pairs):
        prob = 1.0
        for b0, bt in zip(base, outcome):
            prob *= beta_bar if b0 != bt else 1.0 - beta_bar
        table[outcome] = prob
    return table


def upper_bits(adj: np.ndarray) -> tuple:
    iu, ju = np.triu_indices(adj.shape[0], 1)
    return tuple(int(adj[i, j]) for i, j in zip(iu, ju))


def oracle_emd_greedy(mass_a: np.ndarray, mass_b: np.ndarray,
                      bin_width: float) -> float:
    """1-D optimal transport by sweeping bins and carrying surplus forward."""
    if mass_a.shape != mass_b.shape:
        raise ValueError("histograms must share binning")
    carry = 0.0
    cost = 0.0
    for a, b in zip(mass_a, mass_b):
        carry += a - b
        cost += abs(carry) * bin_width
    return cost
