"""Layers for the dual-channel model, built on the Tensor autodiff core.

All trainable parameters are drawn from N(0, init_std) with a caller-owned
counter-based generator, so a fixed seed reproduces every weight bit for
bit. Message passing works directly on (2, E) edge lists; dense adjacency
matrices exist only in the test suite as reference oracles.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, concat, gather_rows, scatter_add_rows, segment_softmax

POOL_MODES = ("max", "mean", "sum", "global_attention")


def gaussian_param(rng: np.random.Generator, shape, std: float = 0.1) -> Tensor:
    return Tensor(rng.normal(0.0, std, size=shape), requires_grad=True)


class Dropout:
    """Inverted dropout; identity in eval mode."""

    def __init__(self, p: float):
        if not 0.0 <= p < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {p}")
        self.p = p

    def __call__(self, x: Tensor, training: bool, rng: np.random.Generator) -> Tensor:
        if not training or self.p == 0.0:
            return x
        mask = (rng.random(x.shape) >= self.p) / (1.0 - self.p)
        return x * Tensor(mask)


class Dense:
    """Affine map with optional relu, y = act(x W + b)."""

    def __init__(self, in_dim, out_dim, activation=None, *, rng, init_std=0.1):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.activation = activation
        self.W = gaussian_param(rng, (in_dim, out_dim), init_std)
        self.b = gaussian_param(rng, (out_dim,), init_std)

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_dim:
            raise ValueError(
                f"dense layer expects {self.in_dim} input columns, got {x.shape[-1]}"
            )
        out = x @ self.W + self.b
        return out.relu() if self.activation == "relu" else out

    def parameters(self):
        return {"W": self.W, "b": self.b}


class MLP:
    """Stack of Dense layers with dropout after each activation."""

    def __init__(self, dims, *, rng, activation="relu", dropout=0.0, init_std=0.1):
        self.layers = [
            Dense(d_in, d_out, activation, rng=rng, init_std=init_std)
            for d_in, d_out in zip(dims[:-1], dims[1:])
        ]
        self.dropout = Dropout(dropout)

    def __call__(self, x: Tensor, training: bool = False, rng=None) -> Tensor:
        for i, layer in enumerate(self.layers):
            if x.shape[-1] != layer.in_dim:
                raise ValueError(
                    f"mlp layer {i}: expected {layer.in_dim} columns, got {x.shape[-1]}"
                )
            x = layer(x)
            x = self.dropout(x, training, rng)
        return x

    def parameters(self):
        return {
            f"layer{i}.{name}": p
            for i, layer in enumerate(self.layers)
            for name, p in layer.parameters().items()
        }


class GCNLayer:
    """Symmetric-normalized graph convolution, H = relu(D^-1/2 A D^-1/2 X W).

    The edge list must already be symmetrized and contain self-loops
    (graphs.symmetrized_edge_index provides exactly that), so every degree
    is at least one. No bias, matching the plain formulation.
    """

    def __init__(self, in_dim, out_dim, *, rng, init_std=0.1):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.W = gaussian_param(rng, (in_dim, out_dim), init_std)

    def __call__(self, x: Tensor, edge_index: np.ndarray) -> Tensor:
        n = x.shape[0]
        src, dst = edge_index
        deg = np.bincount(dst, minlength=n).astype(np.float64)
        coef = 1.0 / np.sqrt(deg[src] * deg[dst])
        xw = x @ self.W
        messages = gather_rows(xw, src) * Tensor(coef[:, None])
        return scatter_add_rows(messages, dst, n).relu()

    def parameters(self):
        return {"W": self.W}


class GATLayer:
    """Edge-list graph attention with LeakyReLU(0.2) scoring.

    Attention normalizes over each node's incoming edges (self-loop
    included). Multi-head outputs are concatenated on hidden layers and
    averaged on the final layer; both collapse to the same thing for the
    default single head.
    """

    def __init__(self, in_dim, out_dim, *, rng, heads=1, concat_heads=True,
                 negative_slope=0.2, init_std=0.1):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.heads = heads
        self.concat_heads = concat_heads
        self.negative_slope = negative_slope
        self.W = [gaussian_param(rng, (in_dim, out_dim), init_std) for _ in range(heads)]
        self.a_src = [gaussian_param(rng, (out_dim, 1), init_std) for _ in range(heads)]
        self.a_dst = [gaussian_param(rng, (out_dim, 1), init_std) for _ in range(heads)]

    def __call__(self, x: Tensor, edge_index: np.ndarray) -> Tensor:
        n = x.shape[0]
        src, dst = edge_index
        head_outputs = []
        for h in range(self.heads):
            xw = x @ self.W[h]
            score_src = xw @ self.a_src[h]
            score_dst = xw @ self.a_dst[h]
            scores = (gather_rows(score_src, src) + gather_rows(score_dst, dst))
            alpha = segment_softmax(scores.leaky_relu(self.negative_slope), dst, n)
            head_outputs.append(scatter_add_rows(gather_rows(xw, src) * alpha, dst, n))
        if len(head_outputs) == 1:
            combined = head_outputs[0]
        elif self.concat_heads:
            combined = concat(head_outputs, axis=1)
        else:
            combined = head_outputs[0]
            for out in head_outputs[1:]:
                combined = combined + out
            combined = combined * (1.0 / self.heads)
        return combined.relu()

    def parameters(self):
        params = {}
        for h in range(self.heads):
            params[f"head{h}.W"] = self.W[h]
            params[f"head{h}.a_src"] = self.a_src[h]
            params[f"head{h}.a_dst"] = self.a_dst[h]
        return params


class GlobalAttentionPool:
    """Softmax-gated weighted sum over nodes; zero gate weights mean-pool."""

    def __init__(self, in_dim, *, rng, init_std=0.1):
        self.in_dim = in_dim
        self.gate = gaussian_param(rng, (in_dim, 1), init_std)

    def __call__(self, h: Tensor) -> Tensor:
        scores = h @ self.gate
        shifted = scores - float(scores.data.max())
        exp = shifted.exp()
        alpha = exp / exp.sum(axis=0, keepdims=True)
        return (h * alpha).sum(axis=0, keepdims=True)

    def parameters(self):
        return {"gate": self.gate}


def graph_pool(h: Tensor, mode: str, gate: GlobalAttentionPool | None = None) -> Tensor:
    """Reduce node embeddings (n, f) to a graph embedding (1, f)."""
    if h.shape[0] == 0:
        raise ValueError("cannot pool an empty graph")
    if mode == "max":
        return h.max(axis=0, keepdims=True)
    if mode == "mean":
        return h.mean(axis=0, keepdims=True)
    if mode == "sum":
        return h.sum(axis=0, keepdims=True)
    if mode == "global_attention":
        if gate is None:
            raise ValueError("global_attention pooling requires a gate layer")
        return gate(h)
    raise ValueError(f"unknown pooling mode {mode!r}, expected one of {POOL_MODES}")
