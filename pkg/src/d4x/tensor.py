"""Minimal dense-tensor autodiff engine.

Tensors wrap float64 numpy arrays and record a provenance graph so that a
single call to ``backward`` on a scalar loss fills the ``grad`` buffer of
every reachable leaf.  Gradients accumulate additively; callers zero them
between optimizer steps.
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    pass


class ContractError(ValueError):
    pass


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape` (reverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    # -- construction helpers ------------------------------------------------

    @staticmethod
    def zeros(shape, requires_grad=False):
        return Tensor(np.zeros(shape), requires_grad)

    @staticmethod
    def param(data):
        return Tensor(np.array(data, dtype=np.float64), requires_grad=True)

    @property
    def shape(self):
        return self.data.shape

    def detach(self):
        return Tensor(self.data.copy())

    def zero_grad(self):
        self.grad = None

    def _make(self, data, parents, backward):
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    # -- elementwise ---------------------------------------------------------

    def _coerce(self, other):
        return other if isinstance(other, Tensor) else Tensor(other)

    def __add__(self, other):
        other = self._coerce(other)
        out_data = self.data + other.data

        def backward(g):
            return _unbroadcast(g, self.shape), _unbroadcast(g, other.shape)

        return self._make(out_data, (self, other), backward)

    __radd__ = __add__

    def __neg__(self):
        return self._make(-self.data, (self,), lambda g: (-g,))

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) + (-self)

    def __mul__(self, other):
        other = self._coerce(other)
        out_data = self.data * other.data

        def backward(g):
            return (_unbroadcast(g * other.data, self.shape),
                    _unbroadcast(g * self.data, other.shape))

        return self._make(out_data, (self, other), backward)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        out_data = self.data / other.data

        def backward(g):
            return (_unbroadcast(g / other.data, self.shape),
                    _unbroadcast(-g * self.data / other.data ** 2, other.shape))

        return self._make(out_data, (self, other), backward)

    def pow_const(self, p: float):
        out_data = self.data ** p

        def backward(g):
            return (g * p * self.data ** (p - 1),)

        return self._make(out_data, (self,), backward)

    def sigmoid(self):
        x = np.asarray(self.data, dtype=np.float64)
        e = np.exp(-np.abs(x))
        s = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
        return self._make(s, (self,), lambda g: (g * s * (1.0 - s),))

    def relu(self):
        mask = self.data > 0

        def backward(g):
            return (g * mask,)

        return self._make(self.data * mask, (self,), backward)

    def log(self):
        if np.any(self.data <= 0):
            raise ValueError("log of non-positive value; clamp first")
        return self._make(np.log(self.data), (self,), lambda g: (g / self.data,))

    def exp(self):
        e = np.exp(self.data)
        return self._make(e, (self,), lambda g: (g * e,))

    def clamp(self, lo: float, hi: float):
        mask = (self.data > lo) & (self.data < hi)

        def backward(g):
            return (g * mask,)

        return self._make(np.clip(self.data, lo, hi), (self,), backward)

    # -- matmul / structure --------------------------------------------------

    def matmul(self, other: "Tensor"):
        other = self._coerce(other)
        if self.shape[-1] != other.shape[-2 if other.data.ndim > 1 else -1]:
            raise ShapeError(f"matmul inner dims disagree: {self.shape} @ {other.shape}")
        out_data = np.matmul(self.data, other.data)

        def backward(g):
            ga = np.matmul(g, np.swapaxes(other.data, -1, -2))
            gb = np.matmul(np.swapaxes(self.data, -1, -2), g)
            return _unbroadcast(ga, self.shape), _unbroadcast(gb, other.shape)

        return self._make(out_data, (self, other), backward)

    __matmul__ = matmul

    def transpose(self, axes=None):
        if axes is None:
            axes = tuple(reversed(range(self.data.ndim)))
        inv = np.argsort(axes)

        def backward(g):
            return (np.transpose(g, inv),)

        return self._make(np.transpose(self.data, axes), (self,), backward)

    @property
    def T(self):
        return self.transpose()

    def reshape(self, *shape):
        old = self.shape

        def backward(g):
            return (g.reshape(old),)

        return self._make(self.data.reshape(*shape), (self,), backward)

    def __getitem__(self, idx):
        out_data = self.data[idx]

        def backward(g):
            full = np.zeros_like(self.data)
            np.add.at(full, idx, g)
            return (full,)

        return self._make(out_data, (self,), backward)

    @staticmethod
    def concat(tensors, axis: int = 0):
        tensors = list(tensors)
        out_data = np.concatenate([t.data for t in tensors], axis=axis)
        sizes = [t.shape[axis] for t in tensors]
        splits = np.cumsum(sizes)[:-1]

        def backward(g):
            return tuple(np.split(g, splits, axis=axis))

        out = Tensor(out_data)
        if any(t.requires_grad for t in tensors):
            out.requires_grad = True
            out._parents = tuple(tensors)
            out._backward = backward
        return out

    # -- reductions ----------------------------------------------------------

    def _check_axis(self, axis):
        if axis is not None and not (-self.data.ndim <= axis < self.data.ndim):
            raise ShapeError(f"axis {axis} invalid for shape {self.shape}")

    def sum(self, axis=None):
        self._check_axis(axis)
        out_data = self.data.sum(axis=axis)

        def backward(g):
            if axis is None:
                return (np.full_like(self.data, g),)
            return (np.broadcast_to(np.expand_dims(g, axis), self.shape).copy(),)

        return self._make(out_data, (self,), backward)

    def mean(self, axis=None):
        self._check_axis(axis)
        count = self.data.size if axis is None else self.shape[axis]
        return self.sum(axis=axis) * (1.0 / count)

    def max(self, axis=None):
        """Max reduction; ties route the gradient toward the lowest index."""
        self._check_axis(axis)
        out_data = self.data.max(axis=axis)
        # argmax breaks ties toward the lowest flat/axis index
        if axis is None:
            hot = np.zeros_like(self.data)
            hot.flat[int(np.argmax(self.data))] = 1.0
        else:
            idx = np.argmax(self.data, axis=axis)
            hot = np.zeros_like(self.data)
            np.put_along_axis(hot, np.expand_dims(idx, axis), 1.0, axis=axis)

        def backward(g):
            if axis is None:
                return (hot * g,)
            return (hot * np.expand_dims(g, axis),)

        return self._make(out_data, (self,), backward)

    # -- backprop ------------------------------------------------------------

    def backward(self):
        if self.data.shape != ():
            raise ContractError("backward requires a scalar root")
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        grads = {id(self): np.array(1.0)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = np.array(pg, dtype=np.float64, copy=True)


# -- optimizer ---------------------------------------------------------------


class AdamState:
    """Per-parameter Adam moments plus the shared step counter."""

    def __init__(self, params: dict, lr: float = 1e-3,
                 b1: float = 0.9, b2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.b1 = b1
        self.b2 = b2
        self.eps = eps
        self.step = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}


def adam_step(params: dict, state: AdamState) -> None:
    """One Adam update from the accumulated grads; zeroes nothing."""
    state.step += 1
    t = state.step
    for name, p in params.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        m = state.m[name]
        v = state.v[name]
        m *= state.b1
        m += (1 - state.b1) * g
        v *= state.b2
        v += (1 - state.b2) * g * g
        m_hat = m / (1 - state.b1 ** t)
        v_hat = v / (1 - state.b2 ** t)
        p.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


def lr_decay(lr0: float, gamma: float, epoch: int) -> float:
    """Exponential schedule lr0 * gamma**epoch."""
    if not (0 < gamma <= 1):
        raise ValueError("gamma must lie in (0, 1]")
    if epoch < 0:
        raise ValueError("epoch must be nonnegative")
    return lr0 * gamma ** epoch


def zero_grads(params: dict) -> None:
    for p in params.values():
        p.grad = None
