"""Minimal reverse-mode autodiff over float64 numpy arrays.

Only the operations the dual-channel model needs are implemented: dense
algebra, elementwise nonlinearities, reductions, row gather/scatter for
edge-list message passing, concatenation and a fused log-softmax. Every
op records a vector-Jacobian closure; Tensor.backward walks the recorded
graph in reverse topological order.

Gradients accumulate into ``.grad`` only on tensors created with
``requires_grad=True`` (parameters); intermediate gradients live and die
inside a single backward pass. Calling backward twice without zeroing
therefore accumulates parameter gradients, which the trainer relies on
for mini-batch averaging.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape``, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _vjp=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._vjp = _vjp

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={'set' if self.grad is not None else 'none'})"

    # -- graph construction -------------------------------------------------

    @staticmethod
    def _make(data, parents, vjp):
        if any(p.requires_grad or p._vjp is not None for p in parents):
            return Tensor(data, _parents=parents, _vjp=vjp)
        return Tensor(data)

    @staticmethod
    def _wrap(x) -> "Tensor":
        return x if isinstance(x, Tensor) else Tensor(x)

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other):
        other = self._wrap(other)
        return Tensor._make(
            self.data + other.data,
            (self, other),
            lambda g: (_unbroadcast(g, self.shape), _unbroadcast(g, other.shape)),
        )

    __radd__ = __add__

    def __sub__(self, other):
        other = self._wrap(other)
        return Tensor._make(
            self.data - other.data,
            (self, other),
            lambda g: (_unbroadcast(g, self.shape), _unbroadcast(-g, other.shape)),
        )

    def __mul__(self, other):
        other = self._wrap(other)
        return Tensor._make(
            self.data * other.data,
            (self, other),
            lambda g: (
                _unbroadcast(g * other.data, self.shape),
                _unbroadcast(g * self.data, other.shape),
            ),
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._wrap(other)
        return Tensor._make(
            self.data / other.data,
            (self, other),
            lambda g: (
                _unbroadcast(g / other.data, self.shape),
                _unbroadcast(-g * self.data / (other.data * other.data), other.shape),
            ),
        )

    def __neg__(self):
        return Tensor._make(-self.data, (self,), lambda g: (-g,))

    def __matmul__(self, other):
        other = self._wrap(other)
        return Tensor._make(
            self.data @ other.data,
            (self, other),
            lambda g: (g @ other.data.T, self.data.T @ g),
        )

    # -- nonlinearities -------------------------------------------------------

    def relu(self):
        mask = self.data > 0
        return Tensor._make(self.data * mask, (self,), lambda g: (g * mask,))

    def leaky_relu(self, slope: float = 0.2):
        factor = np.where(self.data > 0, 1.0, slope)
        return Tensor._make(self.data * factor, (self,), lambda g: (g * factor,))

    def exp(self):
        out = np.exp(self.data)
        return Tensor._make(out, (self,), lambda g: (g * out,))

    def log(self):
        return Tensor._make(np.log(self.data), (self,), lambda g: (g / self.data,))

    # -- reductions and shape -------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        out = self.data.sum(axis=axis, keepdims=keepdims)

        def vjp(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, self.shape).copy(),)

        return Tensor._make(out, (self,), vjp)

    def mean(self, axis=None, keepdims: bool = False):
        count = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def max(self, axis: int = 0, keepdims: bool = False):
        """Columnwise max; ties send the whole gradient to the first winner."""
        idx = self.data.argmax(axis=axis)
        out = self.data.max(axis=axis, keepdims=keepdims)

        def vjp(g):
            grad = np.zeros_like(self.data)
            g2 = g.reshape(idx.shape)
            if axis == 0:
                grad[idx, np.arange(self.data.shape[1])] = g2
            else:
                grad[np.arange(self.data.shape[0]), idx] = g2
            return (grad,)

        return Tensor._make(out, (self,), vjp)

    def reshape(self, *shape):
        old = self.shape
        return Tensor._make(
            self.data.reshape(*shape), (self,), lambda g: (g.reshape(old),)
        )

    def log_softmax(self):
        """Rowwise log-softmax, numerically stable."""
        shifted = self.data - self.data.max(axis=-1, keepdims=True)
        log_norm = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
        out = shifted - log_norm

        def vjp(g):
            return (g - np.exp(out) * g.sum(axis=-1, keepdims=True),)

        return Tensor._make(out, (self,), vjp)

    # -- backward -------------------------------------------------------------

    def backward(self, grad=None):
        """Accumulate d(self)/d(param) into every reachable parameter's .grad."""
        if grad is None:
            grad = np.ones_like(self.data)
        order, seen, stack = [], set(), [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent._vjp is not None or parent.requires_grad:
                    stack.append((parent, False))

        grads: dict[int, np.ndarray] = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad:
                node.grad = g.copy() if node.grad is None else node.grad + g
            if node._vjp is None:
                continue
            for parent, pg in zip(node._parents, node._vjp(g)):
                if not (parent._vjp is not None or parent.requires_grad):
                    continue
                acc = grads.get(id(parent))
                grads[id(parent)] = pg if acc is None else acc + pg


# -- free functions ------------------------------------------------------------


def concat(tensors: list[Tensor], axis: int = 1) -> Tensor:
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        return tuple(
            np.take(g, range(offsets[i], offsets[i + 1]), axis=axis)
            for i in range(len(tensors))
        )

    return Tensor._make(data, tuple(tensors), vjp)


def gather_rows(t: Tensor, idx: np.ndarray) -> Tensor:
    """Rows t[idx]; backward scatter-adds into the source rows."""

    def vjp(g):
        grad = np.zeros_like(t.data)
        np.add.at(grad, idx, g)
        return (grad,)

    return Tensor._make(t.data[idx], (t,), vjp)


def scatter_add_rows(t: Tensor, idx: np.ndarray, n_rows: int) -> Tensor:
    """out[idx[e]] += t[e]; the reduction step of message passing."""
    out = np.zeros((n_rows,) + t.data.shape[1:], dtype=np.float64)
    np.add.at(out, idx, t.data)
    return Tensor._make(out, (t,), lambda g: (g[idx],))


def segment_softmax(scores: Tensor, segments: np.ndarray, n_segments: int) -> Tensor:
    """Softmax of (E, 1) scores within groups given by ``segments``.

    The per-segment max shift is treated as a constant, which leaves the
    gradient exact because softmax is shift-invariant.
    """
    shift = np.full(n_segments, -np.inf)
    np.maximum.at(shift, segments, scores.data[:, 0])
    exp = (scores - shift[segments][:, None]).exp()
    denom = scatter_add_rows(exp, segments, n_segments)
    return exp / gather_rows(denom, segments)


def nll_loss(log_probs: Tensor, labels: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of integer labels under row log-probs.

    Rows must already be normalized log-probabilities; a row whose
    logsumexp strays from 0 by more than 1e-9 is rejected loudly rather
    than silently rescaled.
    """
    row_logsum = np.log(np.exp(log_probs.data).sum(axis=-1))
    if np.abs(row_logsum).max() > 1e-9:
        raise ValueError("nll_loss input rows are not normalized log-probabilities")
    labels = np.asarray(labels, dtype=np.int64)
    onehot = np.zeros_like(log_probs.data)
    onehot[np.arange(len(labels)), labels] = 1.0
    return -(log_probs * Tensor(onehot)).sum() * (1.0 / len(labels))
