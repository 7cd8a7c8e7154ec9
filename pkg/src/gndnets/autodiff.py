"""Reverse-mode automatic differentiation over dense float64 matrices.

A Tape records every operation whose inputs include at least one
differentiable node, in execution order, which is already a topological
order. backward() walks that list once in reverse, accumulating adjoints
into parent nodes and finally into the bound Parameter objects. A tape is
single use: after backward() it is consumed.

The op vocabulary is fixed: matmul, spmm_const, add, subtract, transpose,
scale_by_parameter_row, relu, concat_rows, flatten_rows, unflatten_rows,
dropout, masked_softmax_cross_entropy, l2_penalty. Every forward output is
checked for NaN/Inf and a NonFiniteValue is raised immediately rather than
letting poison propagate.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyMask,
    InvalidParameter,
    NonFiniteValue,
    NonScalarLoss,
)
from .graph import SparseMatrix, spmm


class Parameter:
    """Trainable dense matrix with gradient and Adam moment buffers."""

    def __init__(self, value, name=""):
        value = np.array(value, dtype=np.float64)
        if value.ndim != 2:
            raise DimensionMismatch("parameters are 2-D matrices")
        if not np.all(np.isfinite(value)):
            raise NonFiniteValue(f"parameter {name!r} initialized with non-finite values")
        self.value = value
        self.name = name
        self.gradient = np.zeros_like(value)
        self.adam_m = np.zeros_like(value)
        self.adam_v = np.zeros_like(value)
        self.step_count = 0

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.gradient = np.zeros_like(self.value)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.value.shape})"


class Node:
    """One value in the computation; leaves have no backward function."""

    __slots__ = ("value", "grad", "requires_grad", "_backward")

    def __init__(self, value, requires_grad=False):
        self.value = value
        self.grad = None
        self.requires_grad = requires_grad
        self._backward = None

    @property
    def shape(self):
        return self.value.shape


def _accumulate(node, g):
    if not node.requires_grad:
        return
    # never add in place: adjoint arrays may be shared between siblings
    node.grad = g if node.grad is None else node.grad + g


def _as_matrix(array):
    a = np.asarray(array, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got ndim={a.ndim}")
    return a


class Tape:
    """Recorder for one forward pass plus a single backward sweep."""

    def __init__(self, rng=None):
        self._ops = []
        self._param_leaves = {}
        self.rng = rng
        self._consumed = False

    # ---- leaves -------------------------------------------------------

    def constant(self, array):
        a = _as_matrix(array)
        if not np.all(np.isfinite(a)):
            raise NonFiniteValue("constant contains NaN or Inf")
        return Node(a, requires_grad=False)

    def parameter(self, p: Parameter):
        """Leaf node bound to p; memoized so reuse accumulates one gradient."""
        leaf = self._param_leaves.get(id(p))
        if leaf is None:
            leaf = Node(p.value, requires_grad=True)
            self._param_leaves[id(p)] = (p, leaf)
        else:
            leaf = leaf[1]
        return leaf

    # ---- recording ----------------------------------------------------

    def _record(self, value, parents, backward, op_name):
        if not np.all(np.isfinite(value)):
            raise NonFiniteValue(f"{op_name} produced NaN or Inf")
        out = Node(value, requires_grad=any(p.requires_grad for p in parents))
        if out.requires_grad:
            out._backward = backward
            self._ops.append(out)
        return out

    # ---- ops ----------------------------------------------------------

    def matmul(self, a: Node, b: Node):
        if a.value.shape[1] != b.value.shape[0]:
            raise DimensionMismatch(f"matmul {a.value.shape} @ {b.value.shape}")
        av, bv = a.value, b.value

        def backward(g):
            _accumulate(a, g @ bv.T)
            _accumulate(b, av.T @ g)

        return self._record(av @ bv, (a, b), backward, "matmul")

    def spmm_const(self, m: SparseMatrix, b: Node):
        wt = m.transpose()

        def backward(g):
            _accumulate(b, spmm(wt, g))

        return self._record(spmm(m, b.value), (b,), backward, "spmm_const")

    def add(self, a: Node, b: Node):
        if a.value.shape != b.value.shape:
            raise DimensionMismatch(f"add {a.value.shape} + {b.value.shape}")

        def backward(g):
            _accumulate(a, g)
            _accumulate(b, g)

        return self._record(a.value + b.value, (a, b), backward, "add")

    def subtract(self, a: Node, b: Node):
        if a.value.shape != b.value.shape:
            raise DimensionMismatch(f"subtract {a.value.shape} - {b.value.shape}")

        def backward(g):
            _accumulate(a, g)
            _accumulate(b, -g)

        return self._record(a.value - b.value, (a, b), backward, "subtract")

    def transpose(self, a: Node):
        def backward(g):
            _accumulate(a, np.ascontiguousarray(g.T))

        return self._record(np.ascontiguousarray(a.value.T), (a,), backward, "transpose")

    def scale_by_parameter_row(self, alpha: Node, mats: list[Node]):
        """Weighted sum sum_k alpha[0, k] * mats[k]."""
        k = len(mats)
        if alpha.value.shape != (1, k):
            raise DimensionMismatch(f"need a 1x{k} coefficient row, got {alpha.value.shape}")
        shape = mats[0].value.shape
        for m in mats:
            if m.value.shape != shape:
                raise DimensionMismatch("all hop matrices must share one shape")
        coeffs = alpha.value[0]
        out = coeffs[0] * mats[0].value
        for i in range(1, k):
            out = out + coeffs[i] * mats[i].value

        def backward(g):
            if alpha.requires_grad:
                ga = np.array([[np.sum(g * m.value) for m in mats]])
                _accumulate(alpha, ga)
            for i, m in enumerate(mats):
                _accumulate(m, coeffs[i] * g)

        return self._record(out, (alpha, *mats), backward, "scale_by_parameter_row")

    def relu(self, a: Node):
        positive = a.value > 0.0

        def backward(g):
            _accumulate(a, g * positive)

        return self._record(np.maximum(a.value, 0.0), (a,), backward, "relu")

    def concat_rows(self, mats: list[Node]):
        cols = mats[0].value.shape[1]
        for m in mats:
            if m.value.shape[1] != cols:
                raise DimensionMismatch("row concatenation needs equal column counts")
        offsets = np.cumsum([0] + [m.value.shape[0] for m in mats])

        def backward(g):
            for i, m in enumerate(mats):
                _accumulate(m, g[offsets[i] : offsets[i + 1]])

        value = np.concatenate([m.value for m in mats], axis=0)
        return self._record(value, tuple(mats), backward, "concat_rows")

    def flatten_rows(self, a: Node):
        """Reshape (n, r) to (1, n*r), rows laid out one after another."""
        shape = a.value.shape

        def backward(g):
            _accumulate(a, g.reshape(shape))

        return self._record(a.value.reshape(1, -1), (a,), backward, "flatten_rows")

    def unflatten_rows(self, a: Node, rows: int, cols: int):
        if a.value.shape != (1, rows * cols):
            raise DimensionMismatch(f"cannot unflatten {a.value.shape} to ({rows}, {cols})")

        def backward(g):
            _accumulate(a, g.reshape(1, -1))

        return self._record(a.value.reshape(rows, cols), (a,), backward, "unflatten_rows")

    def dropout(self, a: Node, rate: float, training: bool):
        """Inverted dropout; identity in evaluation mode or at rate 0."""
        if not 0.0 <= rate < 1.0:
            raise InvalidParameter(f"dropout rate must be in [0, 1), got {rate}")
        if not training or rate == 0.0:
            return a
        if self.rng is None:
            raise InvalidParameter("dropout in training mode needs a tape rng")
        scale = 1.0 / (1.0 - rate)
        mask = (self.rng.random(a.value.shape) >= rate) * scale

        def backward(g):
            _accumulate(a, g * mask)

        return self._record(a.value * mask, (a,), backward, "dropout")

    def masked_softmax_cross_entropy(self, logits: Node, labels, mask):
        """Mean cross-entropy of softmax(logits) over the masked vertices.

        Probabilities are clamped at 1e-12 before the log so fully saturated
        wrong predictions yield a large finite loss instead of Inf.
        """
        labels = np.asarray(labels, dtype=np.int64)
        mask = np.asarray(mask, dtype=bool)
        n, c = logits.value.shape
        if labels.shape != (n,) or mask.shape != (n,):
            raise DimensionMismatch("labels and mask must have one entry per row")
        count = int(mask.sum())
        if count == 0:
            raise EmptyMask("loss mask selects no vertices")
        sub = logits.value[mask]
        lab = labels[mask]
        if lab.min() < 0:
            raise ValueError("masked vertices must be labeled")
        probs = softmax_rows(sub)
        picked = probs[np.arange(count), lab]
        value = np.array([[-np.mean(np.log(np.maximum(picked, 1e-12)))]])

        def backward(g):
            grad = np.zeros((n, c))
            inner = probs.copy()
            inner[np.arange(count), lab] -= 1.0
            grad[mask] = inner * (g[0, 0] / count)
            _accumulate(logits, grad)

        return self._record(value, (logits,), backward, "masked_softmax_cross_entropy")

    def l2_penalty(self, params: list[Node], factor: float):
        """factor times the sum of squared entries of each given leaf."""
        total = 0.0
        for p in params:
            total += np.sum(p.value * p.value)
        value = np.array([[factor * total]])

        def backward(g):
            for p in params:
                _accumulate(p, (2.0 * factor * g[0, 0]) * p.value)

        return self._record(value, tuple(params), backward, "l2_penalty")

    # ---- backward -----------------------------------------------------

    def backward(self, loss: Node):
        """Reverse sweep from loss; fills Parameter.gradient for every leaf.

        Parameters the loss never touched receive a zero gradient. The tape
        is consumed afterwards.
        """
        if self._consumed:
            raise RuntimeError("tape already consumed by a previous backward()")
        if loss.value.shape != (1, 1):
            raise NonScalarLoss(f"loss must be 1x1, got {loss.value.shape}")
        self._consumed = True
        loss.grad = np.ones((1, 1))
        for node in reversed(self._ops):
            if node.grad is not None:
                node._backward(node.grad)
        for p, leaf in self._param_leaves.values():
            p.gradient = leaf.grad if leaf.grad is not None else np.zeros_like(p.value)
        self._ops.clear()


def softmax_rows(values: np.ndarray) -> np.ndarray:
    """Numerically stable row-wise softmax of a 2-D array."""
    shifted = values - values.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def glorot_init(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform(-L, L) with L = sqrt(6 / (rows + cols))."""
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))


def adam_step(p: Parameter, lr, beta1=0.9, beta2=0.999, eps=1e-8, l2=0.0):
    """One Adam update of p in place from p.gradient.

    l2 adds the weight-decay term 2 * l2 * value to the gradient before the
    moment updates, so decay participates in the adaptive scaling.
    """
    g = p.gradient
    if l2 != 0.0:
        g = g + (2.0 * l2) * p.value
    p.step_count += 1
    p.adam_m = beta1 * p.adam_m + (1.0 - beta1) * g
    p.adam_v = beta2 * p.adam_v + (1.0 - beta2) * (g * g)
    m_hat = p.adam_m / (1.0 - beta1**p.step_count)
    v_hat = p.adam_v / (1.0 - beta2**p.step_count)
    p.value = p.value - lr * m_hat / (np.sqrt(v_hat) + eps)
