import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from d4x.diffusion import (NoiseLevel, compose_beta_bar, corrupt,
                           sample_noise_level, transition_probability)
from d4x.graphs import Graph, ParameterError, gen_ba_graph
from d4x.oracles import oracle_transition_enumeration, upper_bits


def test_compose_no_noise():
    assert compose_beta_bar([0.0, 0.0, 0.0]) == 0.0


def test_compose_single_step_identity():
    assert np.isclose(compose_beta_bar([0.3]), 0.3)


def test_compose_two_steps_hand_value():
    assert np.isclose(compose_beta_bar([0.1, 0.1]), 0.18)
    # cross-check by multiplying the 2x2 transition matrices
    q = np.array([[0.9, 0.1], [0.1, 0.9]])
    assert np.isclose((q @ q)[0, 1], 0.18)


def test_compose_rejects_out_of_range():
    with pytest.raises(ParameterError):
        compose_beta_bar([0.7])


@given(st.lists(st.floats(0, 0.5), min_size=1, max_size=6))
@settings(max_examples=100, deadline=None)
def test_compose_matches_matrix_product(betas):
    q_bar = np.eye(2)
    for b in betas:
        q_bar = q_bar @ np.array([[1 - b, b], [b, 1 - b]])
    assert abs(compose_beta_bar(betas) - q_bar[0, 1]) < 1e-12


@given(st.lists(st.floats(0, 0.5), min_size=1, max_size=5))
@settings(max_examples=50, deadline=None)
def test_compose_noop_append(betas):
    assert np.isclose(compose_beta_bar(list(betas) + [0.0]),
                      compose_beta_bar(betas))


def test_compose_monotone_in_each_beta():
    base = [0.1, 0.2, 0.05]
    for i in range(3):
        lo = list(base)
        hi = list(base)
        hi[i] = min(0.5, hi[i] + 0.1)
        assert compose_beta_bar(hi) >= compose_beta_bar(lo)


class _Forced:
    def __init__(self, value):
        self.value = value

    def random(self, *a):
        return self.value if not a else np.full(a[0], self.value)


def test_sample_noise_level_extremes():
    lo = sample_noise_level(_Forced(0.0), T=100)
    assert lo.beta_bar == 0.0 and lo.t == 0
    hi = sample_noise_level(_Forced(1.0 - 1e-12), T=100)
    assert np.isclose(hi.beta_bar, 0.5) and hi.t == 100


def test_sample_noise_level_uniform_mean():
    rng = np.random.default_rng(0)
    draws = [sample_noise_level(rng).beta_bar for _ in range(100_000)]
    assert abs(np.mean(draws) - 0.25) < 0.005


def test_transition_probability_table():
    assert transition_probability(0, 1, 0.2) == 0.2
    assert transition_probability(1, 1, 0.2) == 0.8
    for bb in (0.0, 0.17, 0.5):
        for a0 in (0, 1):
            total = sum(transition_probability(a0, at, bb) for at in (0, 1))
            assert np.isclose(total, 1.0)


def test_corrupt_identity_at_zero_noise():
    g = gen_ba_graph(8, 2, seed=0)
    out = corrupt(g, NoiseLevel(0, 0.0), np.random.default_rng(0))
    assert np.array_equal(out.adj, g.adj)
    assert np.array_equal(out.x, g.x)


def test_corrupt_preserves_invariants():
    g = gen_ba_graph(10, 2, seed=1)
    rng = np.random.default_rng(2)
    for bb in (0.1, 0.3, 0.5):
        out = corrupt(g, NoiseLevel(0, bb), rng)
        assert np.array_equal(out.adj, out.adj.T)
        assert np.all(np.diag(out.adj) == 0)


def test_corrupt_half_noise_is_er():
    # beta=0.5: output independent of input, each pair Bernoulli(1/2)
    rng = np.random.default_rng(3)
    g = gen_ba_graph(10, 2, seed=1)
    dens = [corrupt(g, NoiseLevel(0, 0.5), rng).num_edges() for _ in range(4000)]
    pairs = 45
    assert abs(np.mean(dens) - pairs / 2) < 3 * np.sqrt(pairs * 0.25 / 4000) + 0.3


def test_corrupt_empty_graph_binomial_mean():
    n = 10
    g = Graph(n, np.zeros((n, n), dtype=np.int8), np.ones((n, 1)), 0)
    rng = np.random.default_rng(4)
    trials = 10_000
    mean = np.mean([corrupt(g, NoiseLevel(0, 0.2), rng).num_edges()
                    for _ in range(trials)])
    expected = 0.2 * 45
    sigma = np.sqrt(45 * 0.2 * 0.8 / trials)
    assert abs(mean - expected) < 3 * sigma


def test_corrupt_matches_exhaustive_enumeration():
    # 3-node path graph, beta=0.3: empirical frequencies vs exact table
    adj = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=np.int8)
    g = Graph(3, adj, np.ones((3, 1)), 0)
    table = oracle_transition_enumeration(adj, 0.3)
    assert np.isclose(sum(table.values()), 1.0)
    rng = np.random.default_rng(5)
    counts = {k: 0 for k in table}
    trials = 100_000
    for _ in range(trials):
        out = corrupt(g, NoiseLevel(0, 0.3), rng)
        counts[upper_bits(out.adj)] += 1
    tv = 0.5 * sum(abs(counts[k] / trials - p) for k, p in table.items())
    assert tv < 0.01
