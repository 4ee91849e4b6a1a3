import numpy as np
import pytest

from d4x.oracles import oracle_finite_diff
from d4x.tensor import (AdamState, ContractError, ShapeError, Tensor,
                        adam_step, lr_decay, zero_grads)


def test_matmul_identity():
    a = Tensor(np.eye(2))
    b = Tensor([[1.0, 2.0], [3.0, 4.0]])
    assert np.allclose(a.matmul(b).data, b.data)


def test_matmul_orthogonal_supports():
    a = Tensor([[1.0, 0.0], [0.0, 0.0]])
    b = Tensor([[0.0, 0.0], [0.0, 1.0]])
    assert np.allclose(a.matmul(b).data, 0.0)


def test_matmul_shape_error():
    with pytest.raises(ShapeError):
        Tensor(np.ones((2, 3))).matmul(Tensor(np.ones((2, 3))))


def test_matmul_gradient_vs_finite_diff():
    rng = np.random.default_rng(0)
    a0 = rng.uniform(-2, 2, (3, 3))
    b0 = rng.uniform(-2, 2, (3, 3))

    a = Tensor.param(a0)
    loss = a.matmul(Tensor(b0)).sum()
    loss.backward()
    # analytic: ones @ b^T
    assert np.allclose(a.grad, np.ones((3, 3)) @ b0.T)

    fd = oracle_finite_diff(lambda m: float(np.sum(m @ b0)), a0, h=1e-6)
    rel = np.abs(a.grad - fd) / np.maximum(np.abs(fd), 1e-8)
    assert rel.max() < 1e-4


def test_elementwise_basics():
    assert np.isclose(Tensor(0.0).sigmoid().data, 0.5)
    for v in (-1.0, 0.0, 2.0):
        assert np.isclose(Tensor(v).exp().log().data, v)
    assert np.isclose(Tensor(1.0).clamp(1e-7, 1 - 1e-7).data, 1 - 1e-7)


def test_log_nonpositive_raises():
    with pytest.raises(ValueError):
        Tensor(-1.0).log()


def test_reductions():
    assert Tensor([1.0, 2.0, 3.0]).sum().data == 6.0
    assert Tensor(np.zeros(5)).mean().data == 0.0
    t = Tensor.param([2.0, 5.0, 5.0])
    m = t.max()
    assert m.data == 5.0
    m.backward()
    assert np.array_equal(t.grad, [0.0, 1.0, 0.0])  # tie toward lowest index


def test_invalid_axis():
    with pytest.raises(ShapeError):
        Tensor(np.ones((2, 2))).sum(axis=5)


def test_backward_requires_scalar():
    with pytest.raises(ContractError):
        Tensor.param(np.ones(3)).backward()


def test_backward_simple():
    w = Tensor.param(np.ones(4))
    w.sum().backward()
    assert np.array_equal(w.grad, np.ones(4))

    w = Tensor.param([1.0, 2.0])
    (w * w).sum().backward()
    assert np.array_equal(w.grad, [2.0, 4.0])


def test_gradient_accumulates():
    w = Tensor.param([1.0, 2.0])
    w.sum().backward()
    w.sum().backward()
    assert np.array_equal(w.grad, [2.0, 2.0])


def test_no_input_mutation():
    data = np.array([1.0, -2.0, 3.0])
    t = Tensor(data.copy())
    for out in (t.relu(), t.sigmoid(), t.exp(), t + 1.0, t * 2.0):
        assert np.array_equal(t.data, data)


@pytest.mark.parametrize("seed", range(5))
def test_composite_gradients_vs_finite_diff(seed):
    rng = np.random.default_rng(seed)
    x0 = rng.uniform(-2, 2, (4, 3))
    w0 = rng.uniform(-2, 2, (3, 2))

    def f(xv):
        h = np.maximum(xv @ w0, 0)
        return float(np.sum(1 / (1 + np.exp(-h))))

    x = Tensor.param(x0)
    out = x.matmul(Tensor(w0)).relu().sigmoid().sum()
    out.backward()
    fd = oracle_finite_diff(f, x0)
    denom = np.maximum(np.abs(fd), 1e-6)
    assert (np.abs(x.grad - fd) / denom).max() < 1e-3


def test_concat_and_getitem_grads():
    a = Tensor.param(np.arange(4.0).reshape(2, 2))
    b = Tensor.param(np.ones((2, 2)))
    c = Tensor.concat([a, b], axis=1)
    c[0].sum().backward()
    assert np.array_equal(a.grad, [[1, 1], [0, 0]])
    assert np.array_equal(b.grad, [[1, 1], [0, 0]])


def test_adam_zero_gradient_near_noop():
    params = {"w": Tensor.param(np.ones(3))}
    state = AdamState(params)
    params["w"].grad = np.zeros(3)
    adam_step(params, state)
    assert np.abs(params["w"].data - 1.0).max() < 1e-12


def test_adam_single_step_magnitude():
    # bias-corrected first step with g=1 moves by ~lr
    params = {"w": Tensor.param([0.0])}
    state = AdamState(params, lr=1e-3)
    params["w"].grad = np.array([1.0])
    adam_step(params, state)
    expected = -1e-3 * 1.0 / (1.0 + 1e-8)
    assert np.isclose(params["w"].data[0], expected, rtol=1e-6)


def test_adam_deterministic_replay():
    def run():
        params = {"w": Tensor.param([1.0, 2.0])}
        state = AdamState(params, lr=0.01)
        for _ in range(2):
            zero_grads(params)
            params["w"].grad = params["w"].data.copy()
            adam_step(params, state)
        return params["w"].data.copy()

    assert np.array_equal(run(), run())


def test_lr_decay():
    assert lr_decay(5e-4, 1.0, 17) == 5e-4
    assert lr_decay(1e-3, 0.998, 0) == 1e-3
    assert np.isclose(lr_decay(1e-3, 0.998, 100), 1e-3 * 0.998 ** 100)
    assert np.isclose(lr_decay(1e-3, 0.998, 100), 8.186e-4, atol=1e-6)
